#include <string.h>

static void log_name(const char *name)
{
    (void)name;
}

void cwe121_02_bad(const char *name)
{
    char local[16];

    /* FLAW */
    strcpy(local, name);
    log_name(local);
}

void cwe121_02_good(const char *name)
{
    char local[16];

    /* FIX */
    strncpy(local, name, sizeof local - 1);
    local[sizeof local - 1] = '\0';
    log_name(local);
}
