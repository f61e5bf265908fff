#include <stdio.h>

extern int collatz_len(long n);

int main(void) {
    for (long n = 1; n <= 24; ++n) {
        printf("collatz(%ld) = %d\n", n, collatz_len(n));
    }
    return 0;
}
