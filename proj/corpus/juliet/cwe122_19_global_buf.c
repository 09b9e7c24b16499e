#include <string.h>

static char last_error[32];

void cwe122_19_bad(const char *msg)
{
    /* FLAW */
    strcpy(last_error, msg);
}

void cwe122_19_good(const char *msg)
{
    /* FIX */
    strncpy(last_error, msg, sizeof last_error - 1);
}
