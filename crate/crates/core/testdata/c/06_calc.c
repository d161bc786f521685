#include <ctype.h>
#include <stdio.h>
#include <stdlib.h>

static const char *p;

static double expr(void);

static void skip(void) {
    while (isspace((unsigned char)*p)) p++;
}

static double number(void) {
    char *end;
    double v = strtod(p, &end);
    p = end;
    return v;
}

static double factor(void) {
    skip();
    if (*p == '(') {
        p++;
        double v = expr();
        skip();
        if (*p == ')') p++;
        return v;
    }
    if (*p == '-') {
        p++;
        return -factor();
    }
    return number();
}

static double term(void) {
    double v = factor();
    for (;;) {
        skip();
        switch (*p) {
        case '*': p++; v *= factor(); break;
        case '/': p++; { double d = factor(); v = d != 0 ? v / d : 0; } break;
        case '%': p++; v = (double)((long)v % (long)factor()); break;
        default: return v;
        }
    }
}

static double expr(void) {
    double v = term();
    for (;;) {
        skip();
        if (*p == '+') { p++; v += term(); }
        else if (*p == '-') { p++; v -= term(); }
        else return v;
    }
}

int main(int argc, char **argv) {
    const char *inputs[] = {"1 + 2 * 3", "(4 - 1) * (2 + 2) / 3", "-5 + 17 % 4", "2 * (3 + (4 - 1)) * 0.5"};
    for (int i = 0; i < 4; i++) {
        p = inputs[i];
        printf("%s = %g\n", inputs[i], expr());
    }
    for (int i = 1; i < argc; i++) {
        p = argv[i];
        printf("%g\n", expr());
    }
    return 0;
}
