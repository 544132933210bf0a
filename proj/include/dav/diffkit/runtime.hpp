// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace dav {

/// Keeps freed activation buffers in the heap instead of returning them to
/// the OS. Training allocates and frees megabyte-sized tensors every step,
/// and with glibc's defaults each one is a fresh mmap that page-faults on
/// first touch. Call once at program start; a no-op elsewhere.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace dav
