#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dutrpca {

using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines; blank lines and lines starting with '#' are skipped.
KeyValues read_key_values(std::istream& is);
KeyValues read_key_values_file(const std::string& path);
void write_key_values(std::ostream& os, const KeyValues& kv);

/// Typed lookups that remove the key from `kv`, so leftovers can be reported as unknown.
class KeyReader {
public:
    explicit KeyReader(KeyValues kv) : kv_(std::move(kv)) {}

    bool take(const std::string& key, std::string& out);
    void take_int(const std::string& key, int& out);
    void take_long(const std::string& key, long& out);
    void take_u64(const std::string& key, std::uint64_t& out);
    void take_double(const std::string& key, double& out);
    void take_bool(const std::string& key, bool& out);
    void take_longs(const std::string& key, std::vector<long>& out);

    /// Throws InvalidArgument naming any key that was never taken.
    void finish() const;

private:
    KeyValues kv_;
};

} // namespace dutrpca
