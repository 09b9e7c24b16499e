void cwe121_15_bad(const char *s, char stop)
{
    char out[16];
    int i = 0;

    while (s[i] && s[i] != stop) {
        /* FLAW */
        out[i] = s[i];
        i++;
    }
}

void cwe121_15_good(const char *s, char stop)
{
    char out[16];
    int i = 0;

    while (s[i] && s[i] != stop && i < (int)sizeof out - 1) {
        /* FIX */
        out[i] = s[i];
        i++;
    }
    out[i] = '\0';
}
