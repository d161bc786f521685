#include <stdio.h>
#include <stdlib.h>

struct tree {
    int key;
    struct tree *left, *right;
};

static struct tree *insert(struct tree *t, int key) {
    if (!t) {
        t = malloc(sizeof *t);
        if (!t) return NULL;
        t->key = key;
        t->left = t->right = NULL;
        return t;
    }
    if (key < t->key) t->left = insert(t->left, key);
    else if (key > t->key) t->right = insert(t->right, key);
    return t;
}

static int height(const struct tree *t) {
    if (!t) return 0;
    int l = height(t->left), r = height(t->right);
    return 1 + (l > r ? l : r);
}

static int contains(const struct tree *t, int key) {
    while (t) {
        if (key == t->key) return 1;
        t = key < t->key ? t->left : t->right;
    }
    return 0;
}

static void inorder(const struct tree *t, void (*visit)(int, void *), void *ctx) {
    if (!t) return;
    inorder(t->left, visit, ctx);
    visit(t->key, ctx);
    inorder(t->right, visit, ctx);
}

static void accumulate(int k, void *ctx) {
    long *sum = ctx;
    *sum = *sum * 31 + k;
}

static void destroy(struct tree *t) {
    if (!t) return;
    destroy(t->left);
    destroy(t->right);
    free(t);
}

int main(void) {
    struct tree *root = NULL;
    for (int i = 0; i < 200; i++) root = insert(root, (i * 7919) % 211);
    long sum = 0;
    inorder(root, accumulate, &sum);
    int hits = 0;
    for (int i = 0; i < 300; i++) hits += contains(root, i);
    printf("%d %d %ld\n", height(root), hits, sum);
    destroy(root);
    return 0;
}
