#include <stdio.h>

#ifndef SEED
#error "SEED must be defined at compile time"
#endif

#define N 4096
#define REPS 150000

extern void saxpy_kernel(float a, const float *x, float *y, int n);

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
    float a = 0.000123f;
    for (int r = 0; r < REPS; ++r) {
        saxpy_kernel(a, x, y, N);
    }
    double sum = 0.0;
    for (int i = 0; i < N; ++i) {
        sum += (double)y[i];
    }
    printf("checksum: %.6f\n", sum);
    return 0;
}
