#include "mstile/util/fsio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mstile/util/error.hpp"
#include "mstile/util/rng.hpp"

namespace fs = std::filesystem;

namespace mstile {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Error::Kind::file_missing, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (!in.good() && !in.eof()) fail(Error::Kind::io_failure, "read failed: " + path.string());
    return std::move(ss).str();
}

void atomic_write_file(const fs::path& path, std::string_view content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(Error::Kind::io_failure, "cannot create " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out.good()) {
            out.close();
            std::error_code ec;
            fs::remove(tmp, ec);
            fail(Error::Kind::io_failure, "write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(Error::Kind::io_failure, "rename to " + path.string() + " failed");
    }
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_content_hash(const fs::path& path) {
    std::string bytes = read_file(path);
    return hex64(fnv1a64(bytes.data(), bytes.size()));
}

} // namespace mstile
