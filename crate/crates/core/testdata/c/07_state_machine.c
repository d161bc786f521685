#include <stdio.h>

enum state { IDLE, RUNNING, PAUSED, STOPPED, ERROR_STATE };
enum event { START, PAUSE, RESUME, STOP, FAIL, RESET };

static enum state step(enum state s, enum event e) {
    switch (s) {
    case IDLE:
        if (e == START) return RUNNING;
        if (e == FAIL) return ERROR_STATE;
        return IDLE;
    case RUNNING:
        switch (e) {
        case PAUSE: return PAUSED;
        case STOP: return STOPPED;
        case FAIL: return ERROR_STATE;
        default: return RUNNING;
        }
    case PAUSED:
        switch (e) {
        case RESUME: return RUNNING;
        case STOP: return STOPPED;
        case FAIL: return ERROR_STATE;
        default: return PAUSED;
        }
    case STOPPED:
        return e == RESET ? IDLE : STOPPED;
    case ERROR_STATE:
        return e == RESET ? IDLE : ERROR_STATE;
    }
    return ERROR_STATE;
}

static const char *name(enum state s) {
    switch (s) {
    case IDLE: return "idle";
    case RUNNING: return "running";
    case PAUSED: return "paused";
    case STOPPED: return "stopped";
    case ERROR_STATE: return "error";
    }
    return "?";
}

static int classify(int c) {
    switch (c) {
    case 0: case 1: case 2: return 10;
    case 3: return 11;
    case 4: case 5: return 12;
    case 6: return 13;
    case 7: return 14;
    case 8: return 15;
    case 9: return 16;
    default: return -1;
    }
}

int main(void) {
    enum event script[] = {START, PAUSE, RESUME, STOP, RESET, START, FAIL, RESET};
    enum state s = IDLE;
    for (unsigned i = 0; i < sizeof script / sizeof script[0]; i++) {
        s = step(s, script[i]);
        printf("%s\n", name(s));
    }
    int total = 0;
    for (int i = -2; i < 12; i++) total += classify(i);
    printf("%d\n", total);
    return 0;
}
