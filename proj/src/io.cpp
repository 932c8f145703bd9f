#include "factgap/io.h"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "factgap/errors.h"

namespace factgap {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
    static std::atomic<unsigned> counter{0};
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(tid) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            throw IoError("short write to " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("cannot publish " + path.string() + ": " + ec.message());
    }
}

void for_each_jsonl(const fs::path& path,
                    const std::function<void(const json&, std::size_t)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(path.filename().string() + ":" + std::to_string(line_no) +
                                  ": malformed record: " + e.what());
        }
        if (!record.is_object()) {
            throw ValidationError(path.filename().string() + ":" + std::to_string(line_no) +
                                  ": record is not an object");
        }
        fn(record, line_no);
    }
}

std::string to_jsonl(const std::vector<json>& records) {
    std::string out;
    for (const auto& r : records) {
        out += r.dump(-1, ' ', false, json::error_handler_t::replace);
        out += '\n';
    }
    return out;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        hex += kHex[digest[i] >> 4];
        hex += kHex[digest[i] & 0xf];
    }
    return hex;
}

}  // namespace factgap
