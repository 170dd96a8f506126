#pragma once

// Placeholder; the real dispatch lands with the rest of the pipeline.
namespace xrisk::cli {
inline int run(int, char**) { return 2; }
}  // namespace xrisk::cli
