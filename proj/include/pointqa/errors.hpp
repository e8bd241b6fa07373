#pragma once

#include <stdexcept>
#include <string>

namespace pointqa {

// Base for every error the library raises deliberately. The CLI maps these to
// exit status 1; anything else is a bug.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidGeometry : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class CorruptInput : public Error {
public:
    CorruptInput(const std::string& what, std::size_t bad_records)
        : Error(what), bad_records_(bad_records) {}
    std::size_t bad_records() const { return bad_records_; }

private:
    std::size_t bad_records_;
};

class CorruptFeature : public Error {
public:
    CorruptFeature(const std::string& what, std::size_t offset)
        : Error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

class ContractError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class UnmappedClass : public Error {
public:
    using Error::Error;
};

class TrainingDiverged : public Error {
public:
    using Error::Error;
};

}  // namespace pointqa
