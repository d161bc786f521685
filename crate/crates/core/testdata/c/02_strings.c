#include <ctype.h>
#include <stdio.h>
#include <string.h>

static size_t my_strlen(const char *s) {
    const char *p = s;
    while (*p) p++;
    return (size_t)(p - s);
}

static void reverse(char *s) {
    size_t n = my_strlen(s);
    for (size_t i = 0; i < n / 2; i++) {
        char t = s[i];
        s[i] = s[n - 1 - i];
        s[n - 1 - i] = t;
    }
}

static int is_palindrome(const char *s) {
    size_t i = 0, j = my_strlen(s);
    if (j == 0) return 1;
    j--;
    while (i < j) {
        while (i < j && !isalnum((unsigned char)s[i])) i++;
        while (i < j && !isalnum((unsigned char)s[j])) j--;
        if (tolower((unsigned char)s[i]) != tolower((unsigned char)s[j])) return 0;
        i++; j--;
    }
    return 1;
}

static int count_words(const char *s) {
    int words = 0, in = 0;
    for (; *s; s++) {
        if (isspace((unsigned char)*s)) in = 0;
        else if (!in) { in = 1; words++; }
    }
    return words;
}

static void caesar(char *s, int k) {
    for (; *s; s++) {
        if (isupper((unsigned char)*s)) *s = (char)('A' + (*s - 'A' + k) % 26);
        else if (islower((unsigned char)*s)) *s = (char)('a' + (*s - 'a' + k) % 26);
    }
}

int main(void) {
    char buf[128];
    strcpy(buf, "A man, a plan, a canal: Panama");
    printf("%d\n", is_palindrome(buf));
    printf("%d\n", count_words(buf));
    caesar(buf, 3);
    puts(buf);
    reverse(buf);
    puts(buf);
    char line[256];
    while (fgets(line, sizeof line, stdin)) {
        line[strcspn(line, "\n")] = 0;
        printf("%zu %d %d\n", my_strlen(line), count_words(line), is_palindrome(line));
    }
    return 0;
}
