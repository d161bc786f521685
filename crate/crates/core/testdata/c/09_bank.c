#include <stdio.h>
#include <stdlib.h>
#include <string.h>

struct account {
    int id;
    char owner[24];
    long balance;
    int frozen;
};

struct bank {
    struct account *accounts;
    int count;
    int capacity;
};

static int bank_init(struct bank *b, int cap) {
    b->accounts = calloc((size_t)cap, sizeof(struct account));
    if (!b->accounts) return -1;
    b->count = 0;
    b->capacity = cap;
    return 0;
}

static struct account *find(struct bank *b, int id) {
    for (int i = 0; i < b->count; i++)
        if (b->accounts[i].id == id) return &b->accounts[i];
    return NULL;
}

static int open_account(struct bank *b, const char *owner, long initial) {
    if (b->count == b->capacity) {
        int cap = b->capacity * 2;
        struct account *n = realloc(b->accounts, (size_t)cap * sizeof *n);
        if (!n) return -1;
        b->accounts = n;
        b->capacity = cap;
    }
    struct account *a = &b->accounts[b->count];
    a->id = 1000 + b->count;
    snprintf(a->owner, sizeof a->owner, "%s", owner);
    a->balance = initial;
    a->frozen = 0;
    return b->count++;
}

static int transfer(struct bank *b, int from, int to, long amount) {
    struct account *x = find(b, from), *y = find(b, to);
    if (!x || !y) return -1;
    if (x->frozen || y->frozen) return -2;
    if (amount <= 0 || x->balance < amount) return -3;
    x->balance -= amount;
    y->balance += amount;
    return 0;
}

static long total(const struct bank *b) {
    long t = 0;
    for (int i = 0; i < b->count; i++) t += b->accounts[i].balance;
    return t;
}

int main(void) {
    struct bank b;
    if (bank_init(&b, 2)) return 1;
    const char *names[] = {"ann", "bob", "cid", "dee", "eve"};
    for (int i = 0; i < 5; i++) open_account(&b, names[i], 100 * (i + 1));
    b.accounts[3].frozen = 1;
    int codes = 0;
    for (int i = 0; i < 20; i++) codes += transfer(&b, 1000 + i % 5, 1000 + (i * 3) % 5, 37 * i);
    printf("%ld %d\n", total(&b), codes);
    free(b.accounts);
    return 0;
}
