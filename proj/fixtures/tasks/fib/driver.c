#include <stdio.h>

extern long fib_iter(int n);

int main(void) {
    for (int n = 1; n <= 15; ++n) {
        printf("fib(%d) = %ld\n", n, fib_iter(n));
    }
    return 0;
}
