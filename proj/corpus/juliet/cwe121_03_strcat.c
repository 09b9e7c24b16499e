#include <string.h>

void cwe121_03_bad(const char *id)
{
    char line[20] = "id: ";

    /* FLAW */
    strcat(line, id);
}

void cwe121_03_good(const char *id)
{
    char line[20] = "id: ";

    if (strlen(id) >= sizeof line - strlen(line))
        return;
    /* FIX */
    strcat(line, id);
}
