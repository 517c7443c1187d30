#pragma once

#include <filesystem>
#include <functional>
#include <string_view>

namespace ahgcn {

// Runs `write` against a temporary sibling of `target` and renames it into
// place once `write` returns. On exception the temporary is removed and the
// target is left untouched.
void write_atomically(const std::filesystem::path& target,
                      const std::function<void(const std::filesystem::path& tmp)>& write);

void write_text_atomically(const std::filesystem::path& target, std::string_view text);

}  // namespace ahgcn
