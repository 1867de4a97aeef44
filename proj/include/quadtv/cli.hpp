#pragma once

namespace quadtv::cli {

/// Entry point of the `quadtv` tool. Returns 0 on success, 2 on argument
/// errors and 1 on runtime failures.
int run(int argc, const char* const* argv);

}  // namespace quadtv::cli
