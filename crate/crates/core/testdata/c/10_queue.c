#include <stdio.h>
#include <stdlib.h>

struct ring {
    int *data;
    unsigned head, tail, mask;
};

static int ring_new(struct ring *r, unsigned order) {
    r->data = malloc(sizeof(int) << order);
    if (!r->data) return -1;
    r->head = r->tail = 0;
    r->mask = (1u << order) - 1;
    return 0;
}

static int ring_push(struct ring *r, int v) {
    if (r->tail - r->head > r->mask) return -1;
    r->data[r->tail++ & r->mask] = v;
    return 0;
}

static int ring_pop(struct ring *r, int *v) {
    if (r->head == r->tail) return -1;
    *v = r->data[r->head++ & r->mask];
    return 0;
}

struct heap {
    int items[128];
    int n;
};

static void heap_push(struct heap *h, int v) {
    int i = h->n++;
    while (i > 0) {
        int parent = (i - 1) / 2;
        if (h->items[parent] <= v) break;
        h->items[i] = h->items[parent];
        i = parent;
    }
    h->items[i] = v;
}

static int heap_pop(struct heap *h) {
    int top = h->items[0];
    int last = h->items[--h->n];
    int i = 0;
    for (;;) {
        int c = 2 * i + 1;
        if (c >= h->n) break;
        if (c + 1 < h->n && h->items[c + 1] < h->items[c]) c++;
        if (last <= h->items[c]) break;
        h->items[i] = h->items[c];
        i = c;
    }
    h->items[i] = last;
    return top;
}

int main(void) {
    struct ring r;
    struct heap h = {.n = 0};
    if (ring_new(&r, 4)) return 1;
    for (int i = 0; i < 20; i++) ring_push(&r, (i * 37) % 23);
    int v;
    while (ring_pop(&r, &v) == 0) heap_push(&h, v);
    while (h.n) printf("%d ", heap_pop(&h));
    putchar('\n');
    free(r.data);
    return 0;
}
