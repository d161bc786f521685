#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#define CAP 256

struct entry {
    char key[32];
    int value;
    int used;
};

static struct entry table[CAP];

static uint32_t fnv1a(const char *s) {
    uint32_t h = 2166136261u;
    while (*s) {
        h ^= (unsigned char)*s++;
        h *= 16777619u;
    }
    return h;
}

static int put(const char *key, int value) {
    uint32_t h = fnv1a(key) % CAP;
    for (int probe = 0; probe < CAP; probe++) {
        struct entry *e = &table[(h + probe) % CAP];
        if (!e->used || strcmp(e->key, key) == 0) {
            strncpy(e->key, key, sizeof e->key - 1);
            e->value = value;
            e->used = 1;
            return 0;
        }
    }
    return -1;
}

static int get(const char *key, int *out) {
    uint32_t h = fnv1a(key) % CAP;
    for (int probe = 0; probe < CAP; probe++) {
        struct entry *e = &table[(h + probe) % CAP];
        if (!e->used) return 0;
        if (strcmp(e->key, key) == 0) {
            *out = e->value;
            return 1;
        }
    }
    return 0;
}

int main(void) {
    char key[32];
    for (int i = 0; i < 100; i++) {
        snprintf(key, sizeof key, "key%d", i);
        put(key, i * i);
    }
    int v, found = 0;
    for (int i = 0; i < 150; i++) {
        snprintf(key, sizeof key, "key%d", i);
        if (get(key, &v)) found += v & 1;
    }
    printf("%d\n", found);
    return 0;
}
