#include "clincascade/io.hpp"

#include <fstream>
#include <sstream>

#include "clincascade/error.hpp"

namespace clincascade::io {

std::string read_file(const std::filesystem::path& path, std::string_view module, std::string_view operation) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, std::string(module), std::string(operation),
                    "cannot open '" + path.string() + "' for reading", "check that the file exists");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content, std::string_view module,
                std::string_view operation) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::io, std::string(module), std::string(operation),
                    "cannot open '" + path.string() + "' for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw Error(ErrorKind::io, std::string(module), std::string(operation),
                    "write to '" + path.string() + "' failed");
    }
}

}  // namespace clincascade::io
