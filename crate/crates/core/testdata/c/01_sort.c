#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static void insertion_sort(int *a, int n) {
    for (int i = 1; i < n; i++) {
        int key = a[i];
        int j = i - 1;
        while (j >= 0 && a[j] > key) {
            a[j + 1] = a[j];
            j--;
        }
        a[j + 1] = key;
    }
}

static void merge(int *a, int *tmp, int lo, int mid, int hi) {
    int i = lo, j = mid, k = lo;
    while (i < mid && j < hi)
        tmp[k++] = a[i] <= a[j] ? a[i++] : a[j++];
    while (i < mid) tmp[k++] = a[i++];
    while (j < hi) tmp[k++] = a[j++];
    memcpy(a + lo, tmp + lo, (size_t)(hi - lo) * sizeof(int));
}

static void merge_sort(int *a, int *tmp, int lo, int hi) {
    if (hi - lo < 8) {
        insertion_sort(a + lo, hi - lo);
        return;
    }
    int mid = lo + (hi - lo) / 2;
    merge_sort(a, tmp, lo, mid);
    merge_sort(a, tmp, mid, hi);
    merge(a, tmp, lo, mid, hi);
}

static int cmp_int(const void *x, const void *y) {
    int a = *(const int *)x, b = *(const int *)y;
    return (a > b) - (a < b);
}

static int is_sorted(const int *a, int n) {
    for (int i = 1; i < n; i++)
        if (a[i - 1] > a[i]) return 0;
    return 1;
}

int main(int argc, char **argv) {
    int n = argc > 1 ? atoi(argv[1]) : 1000;
    int *a = malloc(sizeof(int) * n);
    int *b = malloc(sizeof(int) * n);
    int *tmp = malloc(sizeof(int) * n);
    if (!a || !b || !tmp) return 1;
    unsigned s = 12345;
    for (int i = 0; i < n; i++) {
        s = s * 1103515245u + 12345u;
        a[i] = b[i] = (int)(s >> 8) % 10000;
    }
    merge_sort(a, tmp, 0, n);
    qsort(b, (size_t)n, sizeof(int), cmp_int);
    printf("%d %d %d\n", is_sorted(a, n), is_sorted(b, n), memcmp(a, b, sizeof(int) * n) == 0);
    free(a); free(b); free(tmp);
    return 0;
}
