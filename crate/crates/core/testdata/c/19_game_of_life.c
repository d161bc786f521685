#include <stdio.h>
#include <string.h>

#define W 32
#define H 16

static unsigned char grid[H][W], next_grid[H][W];

static int neighbours(int y, int x) {
    int n = 0;
    for (int dy = -1; dy <= 1; dy++)
        for (int dx = -1; dx <= 1; dx++) {
            if (!dy && !dx) continue;
            int yy = (y + dy + H) % H, xx = (x + dx + W) % W;
            n += grid[yy][xx];
        }
    return n;
}

static void step(void) {
    for (int y = 0; y < H; y++)
        for (int x = 0; x < W; x++) {
            int n = neighbours(y, x);
            next_grid[y][x] = (unsigned char)(n == 3 || (n == 2 && grid[y][x]));
        }
    memcpy(grid, next_grid, sizeof grid);
}

static int population(void) {
    int p = 0;
    for (int y = 0; y < H; y++)
        for (int x = 0; x < W; x++) p += grid[y][x];
    return p;
}

static void seed(unsigned s) {
    for (int y = 0; y < H; y++)
        for (int x = 0; x < W; x++) {
            s = s * 1664525u + 1013904223u;
            grid[y][x] = (s >> 28) < 5;
        }
}

static void render(void) {
    char line[W + 1];
    for (int y = 0; y < H; y++) {
        for (int x = 0; x < W; x++) line[x] = grid[y][x] ? '#' : '.';
        line[W] = 0;
        puts(line);
    }
}

int main(void) {
    seed(42);
    for (int gen = 0; gen < 50; gen++) step();
    render();
    printf("%d\n", population());
    return 0;
}
