#include <stdio.h>

#ifndef SEED
#error "SEED must be defined at compile time"
#endif

#define N 2048
#define REPS 6000

extern float dot_kernel(const float *x, const float *y, int n);

static unsigned long long rng_state = SEED;

static float frand(void) {
    rng_state = rng_state * 6364136223846793005ULL + 1442695040888963407ULL;
    return (float)((rng_state >> 40) & 0xFFFFu) / 65536.0f;
}

static float x[N];
static float y[N];

int main(void) {
    for (int i = 0; i < N; ++i) {
        x[i] = frand();
        y[i] = frand();
    }
    double acc = 0.0;
    for (int r = 0; r < REPS; ++r) {
        x[r % N] = frand();
        acc += (double)dot_kernel(x, y, N);
    }
    printf("checksum: %.6f\n", acc);
    printf("tail: %.6f %.6f\n", (double)x[N - 1], (double)y[N - 1]);
    return 0;
}
