#pragma once

namespace ownerrel {

// Keeps large freed blocks on the heap instead of returning them to the OS.
// Training allocates and frees first-layer sized buffers for every scene;
// without this each one is page-faulted in again. No-op outside glibc.
void keep_large_allocations();

}  // namespace ownerrel
