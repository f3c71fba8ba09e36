/* Prints its arguments, one per line, then a fixed trailer. */
#include <stdio.h>

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) printf("%s\n", argv[i]);
  printf("echo fixture done\n");
  return 0;
}
