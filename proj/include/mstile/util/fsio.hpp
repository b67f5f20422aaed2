#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace mstile {

// Whole-file helpers. All artifact writes go through atomic_write_file
// (temp + rename in the target directory) so a failed stage never leaves a
// partial file at a final path.

std::string read_file(const std::filesystem::path& path);

void atomic_write_file(const std::filesystem::path& path, std::string_view content);

// FNV-1a of the file bytes, hex-encoded; used by the run log.
std::string file_content_hash(const std::filesystem::path& path);

std::string hex64(std::uint64_t v);

} // namespace mstile
