#include "semlp/io.hpp"

#include <fstream>
#include <iterator>
#include <system_error>

#include <zlib.h>

#include "semlp/error.hpp"

namespace semlp {

namespace {
void write_raw_atomic(const std::filesystem::path& path, const char* data, std::size_t size) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw LoadError(LoadFailure::io, "cannot open " + tmp.string() + " for writing");
        }
        out.write(data, static_cast<std::streamsize>(size));
        if (!out) {
            throw LoadError(LoadFailure::io, "write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw LoadError(LoadFailure::io, "cannot move " + tmp.string() + " to " + path.string());
    }
}
} // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    write_raw_atomic(path, contents.data(), contents.size());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    write_raw_atomic(path, reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError(LoadFailure::io, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    return {text.begin(), text.end()};
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) noexcept {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

std::uint32_t crc32_of(std::string_view text) noexcept {
    return crc32_of(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

} // namespace semlp
