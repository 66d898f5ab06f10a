#pragma once

// Little-endian binary readers/writers with byte-offset diagnostics.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace phash::detail {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

class BinWriter {
 public:
    explicit BinWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error(path + ": cannot open for writing");
    }

    void bytes(const void* p, size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    void u16(uint16_t v) { bytes(&v, 2); }
    void u32(uint32_t v) { bytes(&v, 4); }
    void u64(uint64_t v) { bytes(&v, 8); }
    void f32(float v) { bytes(&v, 4); }
    void f64(double v) { bytes(&v, 8); }
    void str16(const std::string& s) {
        if (s.size() > UINT16_MAX) throw std::runtime_error(path_ + ": string too long");
        u16(static_cast<uint16_t>(s.size()));
        bytes(s.data(), s.size());
    }

    void finish() {
        out_.flush();
        if (!out_) throw std::runtime_error(path_ + ": write failed");
    }

 private:
    std::string path_;
    std::ofstream out_;
};

class BinReader {
 public:
    explicit BinReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw std::runtime_error(path + ": cannot open");
    }

    size_t offset() const { return offset_; }

    void bytes(void* p, size_t n, const char* what) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in_.gcount()) != n) fail(what);
        offset_ += n;
    }
    uint16_t u16(const char* what) { return read_as<uint16_t>(what); }
    uint32_t u32(const char* what) { return read_as<uint32_t>(what); }
    uint64_t u64(const char* what) { return read_as<uint64_t>(what); }
    float f32(const char* what) { return read_as<float>(what); }
    double f64(const char* what) { return read_as<double>(what); }

    std::string str16(const char* what) {
        uint16_t len = u16(what);
        std::string s(len, '\0');
        if (len > 0) bytes(s.data(), len, what);
        return s;
    }

    void expect_magic(const char magic[4]) {
        char buf[4];
        bytes(buf, 4, "magic");
        if (std::memcmp(buf, magic, 4) != 0) {
            throw std::runtime_error(path_ + ": bad magic at byte 0 (expected " +
                                     std::string(magic, 4) + ")");
        }
    }

    void expect_eof() {
        char c;
        in_.read(&c, 1);
        if (!in_.eof()) fail("trailing data");
    }

    [[noreturn]] void fail(const std::string& what) {
        throw std::runtime_error(path_ + ": truncated or malformed " + what + " at byte " +
                                 std::to_string(offset_));
    }

 private:
    template <typename T>
    T read_as(const char* what) {
        T v;
        bytes(&v, sizeof(T), what);
        return v;
    }

    std::string path_;
    std::ifstream in_;
    size_t offset_ = 0;
};

}  // namespace phash::detail
