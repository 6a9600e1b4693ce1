#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace kinoforge {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Little-endian host assumed (x86-64 / aarch64); values are written raw.
class BinaryWriter {
public:
    explicit BinaryWriter(const std::string &path) : out_(path, std::ios::binary), path_(path)
    {
        if (!out_)
            throw std::runtime_error("cannot open for writing: " + path);
    }

    template<class T>
        requires std::is_trivially_copyable_v<T>
    void put(const T &v)
    {
        out_.write(reinterpret_cast<const char *>(&v), sizeof(T));
    }

    template<class T>
        requires std::is_trivially_copyable_v<T>
    void put_array(const T *data, std::size_t n)
    {
        out_.write(reinterpret_cast<const char *>(data), static_cast<std::streamsize>(n * sizeof(T)));
    }

    void put_string(const std::string &s)
    {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    void magic(const char (&m)[9]) { out_.write(m, 8); }

    void close()
    {
        out_.close();
        if (!out_)
            throw std::runtime_error("write failed: " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::string &path) : in_(path, std::ios::binary), path_(path)
    {
        if (!in_)
            throw std::runtime_error("cannot open for reading: " + path);
    }

    template<class T>
        requires std::is_trivially_copyable_v<T>
    T get()
    {
        T v;
        in_.read(reinterpret_cast<char *>(&v), sizeof(T));
        if (!in_)
            throw FormatError("truncated file: " + path_);
        return v;
    }

    template<class T>
        requires std::is_trivially_copyable_v<T>
    void get_array(T *data, std::size_t n)
    {
        in_.read(reinterpret_cast<char *>(data), static_cast<std::streamsize>(n * sizeof(T)));
        if (!in_)
            throw FormatError("truncated file: " + path_);
    }

    std::string get_string()
    {
        const auto n = get<std::uint32_t>();
        if (n > (1u << 24))
            throw FormatError("implausible string length in " + path_);
        std::string s(n, '\0');
        in_.read(s.data(), n);
        if (!in_)
            throw FormatError("truncated file: " + path_);
        return s;
    }

    void expect_magic(const char (&m)[9])
    {
        char buf[8];
        in_.read(buf, 8);
        if (!in_ || std::memcmp(buf, m, 8) != 0)
            throw FormatError("bad magic in " + path_ + " (expected " + std::string(m, 8) + ")");
    }

private:
    std::ifstream in_;
    std::string path_;
};

} // namespace kinoforge
