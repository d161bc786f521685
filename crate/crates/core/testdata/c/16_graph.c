#include <limits.h>
#include <stdio.h>
#include <string.h>

#define V 12

static int adj[V][V];

static void bfs(int src, int *dist) {
    int queue[V], head = 0, tail = 0;
    for (int i = 0; i < V; i++) dist[i] = -1;
    dist[src] = 0;
    queue[tail++] = src;
    while (head < tail) {
        int u = queue[head++];
        for (int v = 0; v < V; v++)
            if (adj[u][v] && dist[v] < 0) {
                dist[v] = dist[u] + 1;
                queue[tail++] = v;
            }
    }
}

static void dijkstra(int src, int *dist) {
    int done[V] = {0};
    for (int i = 0; i < V; i++) dist[i] = INT_MAX;
    dist[src] = 0;
    for (int it = 0; it < V; it++) {
        int u = -1;
        for (int i = 0; i < V; i++)
            if (!done[i] && (u < 0 || dist[i] < dist[u])) u = i;
        if (u < 0 || dist[u] == INT_MAX) break;
        done[u] = 1;
        for (int v = 0; v < V; v++)
            if (adj[u][v] && dist[u] + adj[u][v] < dist[v]) dist[v] = dist[u] + adj[u][v];
    }
}

static int dfs_count(int u, int *seen) {
    seen[u] = 1;
    int c = 1;
    for (int v = 0; v < V; v++)
        if (adj[u][v] && !seen[v]) c += dfs_count(v, seen);
    return c;
}

static int components(void) {
    int seen[V];
    memset(seen, 0, sizeof seen);
    int c = 0;
    for (int i = 0; i < V; i++)
        if (!seen[i]) { dfs_count(i, seen); c++; }
    return c;
}

int main(void) {
    for (int i = 0; i < V; i++)
        for (int j = 0; j < V; j++)
            if (i != j && (i * 5 + j * 3) % 7 == 0) adj[i][j] = adj[j][i] = 1 + (i + j) % 9;
    int d1[V], d2[V];
    bfs(0, d1);
    dijkstra(0, d2);
    long s = 0;
    for (int i = 0; i < V; i++) s = s * 17 + d1[i] + (d2[i] == INT_MAX ? -1 : d2[i]);
    printf("%ld %d\n", s, components());
    return 0;
}
