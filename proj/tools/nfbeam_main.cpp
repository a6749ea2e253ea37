// SPDX-License-Identifier: Apache-2.0

#include "nfbeam/cli.hpp"

int main(int argc, char** argv) { return nfbeam::cli_main(argc, argv); }
