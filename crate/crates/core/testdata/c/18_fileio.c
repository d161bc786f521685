#include <errno.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

struct stats {
    long lines, words, bytes, longest;
};

static void scan(FILE *f, struct stats *s) {
    int c, in_word = 0;
    long cur = 0;
    memset(s, 0, sizeof *s);
    while ((c = fgetc(f)) != EOF) {
        s->bytes++;
        if (c == '\n') {
            s->lines++;
            if (cur > s->longest) s->longest = cur;
            cur = 0;
        } else {
            cur++;
        }
        if (c == ' ' || c == '\n' || c == '\t') in_word = 0;
        else if (!in_word) { in_word = 1; s->words++; }
    }
    if (cur > s->longest) s->longest = cur;
}

static int copy_file(const char *from, const char *to) {
    FILE *in = fopen(from, "rb");
    if (!in) return -errno;
    FILE *out = fopen(to, "wb");
    if (!out) { fclose(in); return -errno; }
    char buf[4096];
    size_t n;
    int rc = 0;
    while ((n = fread(buf, 1, sizeof buf, in)) > 0)
        if (fwrite(buf, 1, n, out) != n) { rc = -EIO; break; }
    fclose(in);
    if (fclose(out) != 0 && rc == 0) rc = -EIO;
    return rc;
}

int main(int argc, char **argv) {
    struct stats s;
    if (argc < 2) {
        scan(stdin, &s);
    } else {
        FILE *f = fopen(argv[1], "r");
        if (!f) { perror(argv[1]); return 1; }
        scan(f, &s);
        fclose(f);
        if (argc > 2 && copy_file(argv[1], argv[2]) < 0) fprintf(stderr, "copy failed\n");
    }
    printf("%ld %ld %ld %ld\n", s.lines, s.words, s.bytes, s.longest);
    return 0;
}
