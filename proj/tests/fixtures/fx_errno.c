/* Exits with the errno of a raw dup(1), or 0 if it succeeded. */
#include <errno.h>
#include <sys/syscall.h>
#include <unistd.h>

int main(void) {
  const long r = syscall(SYS_dup, 1);
  return r < 0 ? errno : 0;
}
