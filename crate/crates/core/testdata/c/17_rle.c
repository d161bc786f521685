#include <stdio.h>
#include <string.h>

static int rle_encode(const unsigned char *in, int n, unsigned char *out, int cap) {
    int o = 0;
    for (int i = 0; i < n;) {
        int run = 1;
        while (i + run < n && in[i + run] == in[i] && run < 255) run++;
        if (o + 2 > cap) return -1;
        out[o++] = (unsigned char)run;
        out[o++] = in[i];
        i += run;
    }
    return o;
}

static int rle_decode(const unsigned char *in, int n, unsigned char *out, int cap) {
    int o = 0;
    for (int i = 0; i + 1 < n; i += 2) {
        if (o + in[i] > cap) return -1;
        memset(out + o, in[i + 1], in[i]);
        o += in[i];
    }
    return o;
}

static const char b64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

static int base64(const unsigned char *in, int n, char *out) {
    int o = 0;
    for (int i = 0; i < n; i += 3) {
        unsigned v = (unsigned)in[i] << 16;
        if (i + 1 < n) v |= (unsigned)in[i + 1] << 8;
        if (i + 2 < n) v |= in[i + 2];
        out[o++] = b64[(v >> 18) & 63];
        out[o++] = b64[(v >> 12) & 63];
        out[o++] = i + 1 < n ? b64[(v >> 6) & 63] : '=';
        out[o++] = i + 2 < n ? b64[v & 63] : '=';
    }
    out[o] = 0;
    return o;
}

static unsigned adler32(const unsigned char *d, int n) {
    unsigned a = 1, b = 0;
    for (int i = 0; i < n; i++) {
        a = (a + d[i]) % 65521;
        b = (b + a) % 65521;
    }
    return (b << 16) | a;
}

int main(void) {
    unsigned char data[200], enc[400], dec[200];
    char text[300];
    for (int i = 0; i < 200; i++) data[i] = (unsigned char)((i / 17) * 3);
    int e = rle_encode(data, 200, enc, sizeof enc);
    int d = rle_decode(enc, e, dec, sizeof dec);
    base64(enc, e, text);
    printf("%d %d %d %s %u\n", e, d, memcmp(data, dec, 200), text, adler32(data, 200));
    return 0;
}
