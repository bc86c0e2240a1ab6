#pragma once

namespace molbench::cli {

/// Entry point of the molbench executable. Returns the process exit code.
int run(int argc, char** argv);

}  // namespace molbench::cli
