#include <stdio.h>
#include <stdlib.h>

struct node {
    int value;
    struct node *next;
};

static struct node *push(struct node *head, int v) {
    struct node *n = malloc(sizeof *n);
    if (n == NULL) return head;
    n->value = v;
    n->next = head;
    return n;
}

static struct node *reverse(struct node *head) {
    struct node *prev = NULL;
    while (head) {
        struct node *next = head->next;
        head->next = prev;
        prev = head;
        head = next;
    }
    return prev;
}

static struct node *remove_value(struct node *head, int v) {
    struct node **pp = &head;
    while (*pp) {
        if ((*pp)->value == v) {
            struct node *dead = *pp;
            *pp = dead->next;
            free(dead);
        } else {
            pp = &(*pp)->next;
        }
    }
    return head;
}

static int length(const struct node *n) {
    int c = 0;
    for (; n; n = n->next) c++;
    return c;
}

static long sum(const struct node *n) {
    long s = 0;
    while (n) { s += n->value; n = n->next; }
    return s;
}

static void free_list(struct node *n) {
    while (n) {
        struct node *next = n->next;
        free(n);
        n = next;
    }
}

int main(void) {
    struct node *list = NULL;
    for (int i = 0; i < 50; i++) list = push(list, i % 7);
    list = reverse(list);
    list = remove_value(list, 3);
    printf("%d %ld\n", length(list), sum(list));
    free_list(list);
    return 0;
}
