#include <math.h>
#include <stdio.h>

static double newton_sqrt(double x) {
    if (x <= 0) return 0;
    double g = x > 1 ? x / 2 : 1;
    for (int i = 0; i < 30; i++) g = 0.5 * (g + x / g);
    return g;
}

static float dot(const float *a, const float *b, int n) {
    float s = 0.0f;
    for (int i = 0; i < n; i++) s += a[i] * b[i];
    return s;
}

static double simpson(double (*f)(double), double a, double b, int n) {
    double h = (b - a) / n, s = f(a) + f(b);
    for (int i = 1; i < n; i++) s += f(a + i * h) * (i % 2 ? 4 : 2);
    return s * h / 3;
}

static double poly(double x) {
    return ((3.0 * x - 2.0) * x + 0.5) * x - 7.0;
}

static void stats(const double *v, int n, double *mean, double *sd) {
    double m = 0, q = 0;
    for (int i = 0; i < n; i++) m += v[i];
    m /= n;
    for (int i = 0; i < n; i++) q += (v[i] - m) * (v[i] - m);
    *mean = m;
    *sd = n > 1 ? newton_sqrt(q / (n - 1)) : 0;
}

static int to_fixed(double x) {
    return (int)lround(x * 65536.0);
}

int main(void) {
    float a[16], b[16];
    double v[32];
    for (int i = 0; i < 16; i++) { a[i] = i * 0.5f; b[i] = 1.0f / (i + 1); }
    for (int i = 0; i < 32; i++) v[i] = sin(i * 0.3) * 10;
    double mean, sd;
    stats(v, 32, &mean, &sd);
    printf("%f %f %f %f %d\n", newton_sqrt(2.0), dot(a, b, 16), simpson(poly, 0, 2, 100), mean + sd, to_fixed(mean));
    return 0;
}
