#include <stdio.h>
#include <string.h>

#define MAX_ITEMS 64

struct item {
    char sku[12];
    int qty;
    unsigned price_cents;
    short category;
    unsigned char flags;
};

static struct item inv[MAX_ITEMS];
static int n_items;

static int add_item(const char *sku, int qty, unsigned price, short cat) {
    if (n_items >= MAX_ITEMS) return -1;
    struct item *it = &inv[n_items++];
    strncpy(it->sku, sku, sizeof it->sku - 1);
    it->sku[sizeof it->sku - 1] = '\0';
    it->qty = qty;
    it->price_cents = price;
    it->category = cat;
    it->flags = qty < 5 ? 1 : 0;
    return n_items - 1;
}

static unsigned long long value_by_category(short cat) {
    unsigned long long total = 0;
    for (int i = 0; i < n_items; i++)
        if (inv[i].category == cat) total += (unsigned long long)inv[i].qty * inv[i].price_cents;
    return total;
}

static int restock(int threshold, int amount) {
    int changed = 0;
    for (int i = 0; i < n_items; i++) {
        if (inv[i].qty < threshold) {
            inv[i].qty += amount;
            inv[i].flags &= (unsigned char)~1u;
            changed++;
        }
    }
    return changed;
}

static int cheapest(void) {
    int best = -1;
    for (int i = 0; i < n_items; i++)
        if (best < 0 || inv[i].price_cents < inv[best].price_cents) best = i;
    return best;
}

int main(void) {
    char sku[12];
    for (int i = 0; i < 40; i++) {
        snprintf(sku, sizeof sku, "SKU%04d", i * 13);
        add_item(sku, (i * 7) % 11, 199u + (unsigned)(i * 101 % 997), (short)(i % 4));
    }
    printf("%llu %llu\n", value_by_category(0), value_by_category(3));
    printf("%d %d\n", restock(3, 10), cheapest());
    return 0;
}
