#include <stdint.h>
#include <stdio.h>

enum op { PUSH, ADD, SUB, MUL, DIV, DUP, SWAP, JZ, JMP, PRINT, HALT, DEC, OVER };

struct vm {
    int64_t stack[64];
    int sp;
    int pc;
    long steps;
};

static int push(struct vm *m, int64_t v) {
    if (m->sp >= 64) return -1;
    m->stack[m->sp++] = v;
    return 0;
}

static int64_t pop(struct vm *m) {
    return m->sp > 0 ? m->stack[--m->sp] : 0;
}

static int run(struct vm *m, const int *code, int len) {
    while (m->pc < len) {
        int op = code[m->pc++];
        int64_t a, b;
        m->steps++;
        switch (op) {
        case PUSH: if (push(m, code[m->pc++])) return -1; break;
        case ADD: b = pop(m); a = pop(m); push(m, a + b); break;
        case SUB: b = pop(m); a = pop(m); push(m, a - b); break;
        case MUL: b = pop(m); a = pop(m); push(m, a * b); break;
        case DIV: b = pop(m); a = pop(m); if (!b) return -2; push(m, a / b); break;
        case DUP: a = pop(m); push(m, a); push(m, a); break;
        case SWAP: b = pop(m); a = pop(m); push(m, b); push(m, a); break;
        case OVER: b = pop(m); a = pop(m); push(m, a); push(m, b); push(m, a); break;
        case DEC: a = pop(m); push(m, a - 1); break;
        case JZ: a = pop(m); if (!a) m->pc = code[m->pc]; else m->pc++; break;
        case JMP: m->pc = code[m->pc]; break;
        case PRINT: printf("%lld\n", (long long)pop(m)); break;
        case HALT: return 0;
        default: return -3;
        }
    }
    return 0;
}

int main(void) {
    /* factorial of 10 */
    const int code[] = {PUSH, 1, PUSH, 10,
                        DUP, JZ, 16,
                        SWAP, OVER, MUL, SWAP, DEC, JMP, 4,
                        HALT, HALT,
                        SWAP, PRINT, HALT};
    struct vm m = {.sp = 0, .pc = 0, .steps = 0};
    int rc = run(&m, code, (int)(sizeof code / sizeof code[0]));
    printf("%d %ld\n", rc, m.steps);
    return 0;
}
