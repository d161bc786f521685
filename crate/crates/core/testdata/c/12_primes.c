#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int sieve(unsigned char *composite, int n) {
    memset(composite, 0, (size_t)n + 1);
    int count = 0;
    for (int i = 2; i <= n; i++) {
        if (composite[i]) continue;
        count++;
        for (long j = (long)i * i; j <= n; j += i) composite[j] = 1;
    }
    return count;
}

static unsigned long long powmod(unsigned long long b, unsigned long long e, unsigned long long m) {
    unsigned long long r = 1;
    b %= m;
    while (e) {
        if (e & 1) r = (unsigned __int128)r * b % m;
        b = (unsigned __int128)b * b % m;
        e >>= 1;
    }
    return r;
}

static int miller_rabin(unsigned long long n) {
    if (n < 4) return n >= 2;
    if (n % 2 == 0) return 0;
    unsigned long long d = n - 1;
    int s = 0;
    while ((d & 1) == 0) { d >>= 1; s++; }
    static const unsigned long long bases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    for (int i = 0; i < 12; i++) {
        unsigned long long a = bases[i] % n;
        if (a == 0) continue;
        unsigned long long x = powmod(a, d, n);
        if (x == 1 || x == n - 1) continue;
        int composite = 1;
        for (int r = 1; r < s; r++) {
            x = (unsigned __int128)x * x % n;
            if (x == n - 1) { composite = 0; break; }
        }
        if (composite) return 0;
    }
    return 1;
}

static unsigned gcd(unsigned a, unsigned b) {
    while (b) { unsigned t = a % b; a = b; b = t; }
    return a;
}

int main(void) {
    int n = 10000;
    unsigned char *c = malloc((size_t)n + 1);
    if (!c) return 1;
    int count = sieve(c, n);
    int agree = 0;
    for (int i = 0; i <= n; i++) agree += (i >= 2 && !c[i]) == miller_rabin((unsigned long long)i);
    printf("%d %d %u\n", count, agree, gcd(1071, 462));
    printf("%d\n", miller_rabin(1000000007ull));
    free(c);
    return 0;
}
