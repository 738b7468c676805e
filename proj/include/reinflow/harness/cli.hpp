#pragma once

namespace reinflow::harness {

// Exit codes: 0 ok, 1 failed verification or usage error, 2 config error,
// 3 checkpoint error, 4 numeric abort.
int run_command(int argc, char** argv);

}  // namespace reinflow::harness
