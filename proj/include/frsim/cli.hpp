#pragma once

namespace frsim {

// Entry point behind the frsim executable; exposed so tests can drive the
// CLI in-process. Subcommands: simulate, montecarlo, theory, detect.
// Returns 0 on success, 1 on validation/usage errors, 2 on runtime errors.
int cli_main(int argc, const char* const* argv);

}  // namespace frsim
