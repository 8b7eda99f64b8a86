#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ckm::binary {

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    }

    void bytes(const void* data, std::size_t size) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    }
    void magic(std::string_view tag) { bytes(tag.data(), tag.size()); }

    template <class T>
    void le(T value) {
        static_assert(std::is_arithmetic_v<T>);
        std::array<unsigned char, sizeof(T)> raw;
        std::memcpy(raw.data(), &value, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(raw.begin(), raw.end());
        }
        bytes(raw.data(), raw.size());
    }

    void finish() {
        out_.flush();
        if (!out_) throw std::runtime_error("write to " + path_.string() + " failed");
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw std::runtime_error("cannot open " + path.string());
    }

    void bytes(void* data, std::size_t size) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
        if (static_cast<std::size_t>(in_.gcount()) != size) {
            throw std::runtime_error(path_.string() + ": truncated file");
        }
    }

    void expect_magic(std::string_view tag) {
        std::string got(tag.size(), '\0');
        bytes(got.data(), got.size());
        if (got != tag) {
            throw std::runtime_error(path_.string() + ": bad magic, expected " + std::string(tag));
        }
    }

    template <class T>
    T le() {
        static_assert(std::is_arithmetic_v<T>);
        std::array<unsigned char, sizeof(T)> raw;
        bytes(raw.data(), raw.size());
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(raw.begin(), raw.end());
        }
        T value;
        std::memcpy(&value, raw.data(), sizeof(T));
        return value;
    }

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ifstream in_;
};

}  // namespace ckm::binary
