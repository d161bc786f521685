#include <stdio.h>
#include <stdlib.h>

#define N 24

static void matmul(const double *a, const double *b, double *c, int n) {
    for (int i = 0; i < n; i++)
        for (int j = 0; j < n; j++) {
            double s = 0.0;
            for (int k = 0; k < n; k++) s += a[i * n + k] * b[k * n + j];
            c[i * n + j] = s;
        }
}

static void transpose(double *a, int n) {
    for (int i = 0; i < n; i++)
        for (int j = i + 1; j < n; j++) {
            double t = a[i * n + j];
            a[i * n + j] = a[j * n + i];
            a[j * n + i] = t;
        }
}

static double trace(const double *a, int n) {
    double t = 0;
    for (int i = 0; i < n; i++) t += a[i * n + i];
    return t;
}

static int lu_decompose(double *a, int n) {
    for (int k = 0; k < n; k++) {
        if (a[k * n + k] == 0.0) return -1;
        for (int i = k + 1; i < n; i++) {
            double f = a[i * n + k] / a[k * n + k];
            a[i * n + k] = f;
            for (int j = k + 1; j < n; j++) a[i * n + j] -= f * a[k * n + j];
        }
    }
    return 0;
}

int main(void) {
    double *a = calloc(N * N, sizeof(double));
    double *b = calloc(N * N, sizeof(double));
    double *c = calloc(N * N, sizeof(double));
    for (int i = 0; i < N * N; i++) {
        a[i] = (i % 7) + 1.5;
        b[i] = (i % 5) - 2.25;
    }
    for (int i = 0; i < N; i++) a[i * N + i] += 100.0;
    matmul(a, b, c, N);
    transpose(c, N);
    printf("%f\n", trace(c, N));
    printf("%d\n", lu_decompose(a, N));
    free(a); free(b); free(c);
    return 0;
}
