// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#include "dav/cli/app.hpp"
#include "dav/diffkit/runtime.hpp"

int main(int argc, char** argv) {
  dav::tune_allocator();
  return dav::run_cli(argc, argv);
}
