// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iostream>

namespace nfbeam {

// Entry point behind the `nfbeam` binary; also callable in-process by tests.
// Returns 0 on success, 2 on usage errors, 1 on runtime failures.
int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
             std::ostream& err = std::cerr);

}  // namespace nfbeam
