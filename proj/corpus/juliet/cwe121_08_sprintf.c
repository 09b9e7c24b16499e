#include <stdio.h>

void cwe121_08_bad(const char *user)
{
    char msg[16];

    /* FLAW */
    sprintf(msg, "user=%s", user);
}

void cwe121_08_good(const char *user)
{
    char msg[16];

    /* FIX */
    snprintf(msg, sizeof msg, "user=%s", user);
}
