#include <stdlib.h>
#include "config.h"

int g_slack = 0;

void load_config(int argc, char **argv)
{
    if (argc > 2)
        g_slack = atoi(argv[2]);
    else
        g_slack = 16;
}
