#pragma once

namespace lstmcov {

/// Keeps freed tensor buffers in the heap instead of returning them to the OS
/// after every step. No-op outside glibc. Call once from main().
void tune_allocator();

} // namespace lstmcov
