#ifndef CORPUS_CONFIG_H
#define CORPUS_CONFIG_H

/* Extra record room granted by the configuration file. */
extern int g_slack;

void load_config(int argc, char **argv);

#endif
