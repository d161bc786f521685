#include <ctype.h>
#include <stdio.h>
#include <string.h>

enum kind { T_IDENT, T_NUMBER, T_STRING, T_PUNCT, T_END };

struct token {
    enum kind kind;
    const char *start;
    int len;
};

static const char *cursor;

static struct token next_token(void) {
    struct token t;
    while (*cursor && isspace((unsigned char)*cursor)) cursor++;
    t.start = cursor;
    if (!*cursor) { t.kind = T_END; t.len = 0; return t; }
    if (isalpha((unsigned char)*cursor) || *cursor == '_') {
        while (isalnum((unsigned char)*cursor) || *cursor == '_') cursor++;
        t.kind = T_IDENT;
    } else if (isdigit((unsigned char)*cursor)) {
        while (isdigit((unsigned char)*cursor) || *cursor == '.') cursor++;
        t.kind = T_NUMBER;
    } else if (*cursor == '"') {
        cursor++;
        while (*cursor && *cursor != '"') {
            if (*cursor == '\\' && cursor[1]) cursor++;
            cursor++;
        }
        if (*cursor) cursor++;
        t.kind = T_STRING;
    } else {
        cursor++;
        t.kind = T_PUNCT;
    }
    t.len = (int)(cursor - t.start);
    return t;
}

static int is_keyword(const struct token *t) {
    static const char *kw[] = {"if", "else", "while", "for", "return", "int", "char", "void"};
    for (unsigned i = 0; i < sizeof kw / sizeof kw[0]; i++)
        if ((int)strlen(kw[i]) == t->len && strncmp(kw[i], t->start, (size_t)t->len) == 0) return 1;
    return 0;
}

int main(void) {
    const char *src = "int main(void) { char *s = \"hi \\\"there\\\"\"; for (int i = 0; i < 10; i++) return 3.14; }";
    int counts[5] = {0}, keywords = 0;
    cursor = src;
    for (;;) {
        struct token t = next_token();
        counts[t.kind]++;
        if (t.kind == T_END) break;
        if (t.kind == T_IDENT) keywords += is_keyword(&t);
    }
    printf("%d %d %d %d %d\n", counts[0], counts[1], counts[2], counts[3], keywords);
    return 0;
}
