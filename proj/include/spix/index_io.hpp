// Copyright 2026-present the spix authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>

#include "spix/index.hpp"

// SPIX binary layout, all fixed-width integers little-endian:
//
//   "SPIX" u32:version
//   u32:bits f64:global_max u32:query_scale
//   u32:num_docs  { u32:len bytes }*
//   u32:num_terms { u32:len bytes }*
//   per term: u32:list_len { leb128:gap }* { impact }*
//
// The first gap is the first doc number; impacts take 1, 2 or 4 bytes for
// bit widths up to 8, 16 and 32.

namespace spix {

inline constexpr char kIndexMagic[4] = {'S', 'P', 'I', 'X'};
inline constexpr std::uint32_t kIndexVersion = 1;

class IndexFormatError : public DataError {
public:
    enum class Kind { BadMagic, BadVersion, Truncated, Corrupt };

    IndexFormatError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}

    [[nodiscard]] Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct IndexStats {
    std::size_t num_docs = 0;
    std::size_t num_terms = 0;
    std::size_t num_postings = 0;
    std::size_t max_list_len = 0;
    std::size_t serialized_bytes = 0;
    std::size_t empty_lists = 0;
    std::size_t empty_docs = 0;

    friend bool operator==(const IndexStats&, const IndexStats&) = default;
};

namespace detail {

inline std::size_t leb128_size(std::uint32_t v) {
    std::size_t n = 1;
    while (v >= 0x80) {
        v >>= 7;
        ++n;
    }
    return n;
}

class ByteWriter {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const char*>(p);
        buf_.append(c, n);
    }

    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

    template <class T>
    void le(T v) {
        static_assert(std::is_unsigned_v<T>);
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }

    void leb128(std::uint32_t v) {
        while (v >= 0x80) {
            u8(static_cast<std::uint8_t>(v | 0x80));
            v >>= 7;
        }
        u8(static_cast<std::uint8_t>(v));
    }

    void str(const std::string& s) {
        le(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const char> data) : data_(data) {}

    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) {
            throw IndexFormatError(IndexFormatError::Kind::Truncated,
                                   "index file truncated at byte " + std::to_string(pos_));
        }
    }

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }

    template <class T>
    T le() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<T>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return v;
    }

    double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }

    std::uint32_t leb128() {
        std::uint64_t v = 0;
        for (int shift = 0; shift < 35; shift += 7) {
            const auto b = u8();
            v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
            if ((b & 0x80) == 0) {
                if (v > 0xffffffffu) {
                    break;
                }
                return static_cast<std::uint32_t>(v);
            }
        }
        throw IndexFormatError(IndexFormatError::Kind::Corrupt, "varint overflow at byte " + std::to_string(pos_));
    }

    std::string str() {
        const auto n = le<std::uint32_t>();
        need(n);
        std::string s(data_.data() + pos_, n);
        pos_ += n;
        return s;
    }

    [[nodiscard]] bool done() const { return pos_ == data_.size(); }
    [[nodiscard]] std::size_t pos() const { return pos_; }

private:
    std::span<const char> data_;
    std::size_t pos_ = 0;
};

[[noreturn]] inline void corrupt(const std::string& what) {
    throw IndexFormatError(IndexFormatError::Kind::Corrupt, "corrupt index: " + what);
}

}  // namespace detail

/// Exact byte length of the serialized form. For a raw index this is the size
/// it will have once quantized at its configured bit width.
template <class Value>
std::size_t serialized_size(const InvertedIndex<Value>& index) {
    std::size_t n = 4 + 4 + 4 + 8 + 4;
    n += 4;
    for (const auto& id : index.doc_ids) {
        n += 4 + id.size();
    }
    n += 4;
    for (const auto& t : index.vocab.terms()) {
        n += 4 + t.size();
    }
    const std::size_t width = impact_width(index.quant.bits);
    for (const auto& l : index.lists) {
        n += 4 + l.size() * width;
        DocNum prev = 0;
        for (DocNum d : l.docs) {
            n += detail::leb128_size(d - prev);
            prev = d;
        }
    }
    return n;
}

inline std::string serialize(const ImpactIndex& index) {
    detail::ByteWriter w;
    w.bytes(kIndexMagic, 4);
    w.le(kIndexVersion);
    w.le(index.quant.bits);
    w.f64(index.quant.global_max);
    w.le(index.quant.query_scale);
    w.le(static_cast<std::uint32_t>(index.doc_ids.size()));
    for (const auto& id : index.doc_ids) {
        w.str(id);
    }
    w.le(static_cast<std::uint32_t>(index.vocab.size()));
    for (const auto& t : index.vocab.terms()) {
        w.str(t);
    }
    const std::size_t width = impact_width(index.quant.bits);
    for (const auto& l : index.lists) {
        w.le(static_cast<std::uint32_t>(l.size()));
        DocNum prev = 0;
        for (DocNum d : l.docs) {
            w.leb128(d - prev);
            prev = d;
        }
        for (Impact v : l.values) {
            switch (width) {
                case 1: w.u8(static_cast<std::uint8_t>(v)); break;
                case 2: w.le(static_cast<std::uint16_t>(v)); break;
                default: w.le(static_cast<std::uint32_t>(v)); break;
            }
        }
    }
    return w.take();
}

inline ImpactIndex deserialize(std::span<const char> data) {
    if (data.size() < 4 || std::memcmp(data.data(), kIndexMagic, 4) != 0) {
        throw IndexFormatError(IndexFormatError::Kind::BadMagic, "not an index file");
    }
    detail::ByteReader r(data.subspan(4));
    const auto version = r.le<std::uint32_t>();
    if (version != kIndexVersion) {
        throw IndexFormatError(IndexFormatError::Kind::BadVersion,
                               "unsupported index version " + std::to_string(version));
    }
    ImpactIndex index;
    index.quant.bits = r.le<std::uint32_t>();
    index.quant.global_max = r.f64();
    index.quant.query_scale = r.le<std::uint32_t>();
    try {
        index.quant.validate();
    } catch (const DomainError& e) {
        detail::corrupt(e.what());
    }

    const auto num_docs = r.le<std::uint32_t>();
    std::unordered_set<std::string> seen;
    index.doc_ids.reserve(std::min<std::size_t>(num_docs, data.size()));
    for (std::uint32_t i = 0; i < num_docs; ++i) {
        auto id = r.str();
        if (!seen.insert(id).second) {
            detail::corrupt("duplicate document id \"" + id + "\"");
        }
        index.doc_ids.push_back(std::move(id));
    }
    const auto num_terms = r.le<std::uint32_t>();
    for (std::uint32_t i = 0; i < num_terms; ++i) {
        const auto t = r.str();
        if (index.vocab.insert(t) != i) {
            detail::corrupt("duplicate term \"" + t + "\"");
        }
    }

    const std::size_t width = impact_width(index.quant.bits);
    const std::uint64_t max_level = index.quant.max_level();
    index.lists.resize(num_terms);
    for (auto& l : index.lists) {
        const auto len = r.le<std::uint32_t>();
        r.need(len);  // at least one byte per gap
        l.docs.reserve(len);
        l.values.reserve(len);
        std::uint64_t doc = 0;
        for (std::uint32_t i = 0; i < len; ++i) {
            const auto gap = r.leb128();
            if (i > 0 && gap == 0) {
                detail::corrupt("zero doc gap");
            }
            doc += gap;
            if (doc >= num_docs) {
                detail::corrupt("doc number out of range");
            }
            l.docs.push_back(static_cast<DocNum>(doc));
        }
        for (std::uint32_t i = 0; i < len; ++i) {
            Impact v = 0;
            switch (width) {
                case 1: v = r.u8(); break;
                case 2: v = r.le<std::uint16_t>(); break;
                default: v = r.le<std::uint32_t>(); break;
            }
            if (v == 0 || v > max_level) {
                detail::corrupt("impact outside [1, 2^bits - 1]");
            }
            l.values.push_back(v);
        }
        l.recompute_max();
    }
    if (!r.done()) {
        detail::corrupt("trailing bytes after last posting list");
    }
    return index;
}

/// Writes the index and returns the number of bytes written.
inline std::size_t save_index(const ImpactIndex& index, std::ostream& out) {
    const auto bytes = serialize(index);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw DataError("failed to write index");
    }
    return bytes.size();
}

inline ImpactIndex load_index(std::istream& in) {
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return deserialize(bytes);
}

template <class Value>
IndexStats index_stats(const InvertedIndex<Value>& index) {
    IndexStats s;
    s.num_docs = index.num_docs();
    s.num_terms = index.num_terms();
    std::vector<bool> has_posting(index.num_docs(), false);
    for (const auto& l : index.lists) {
        s.num_postings += l.size();
        s.max_list_len = std::max(s.max_list_len, l.size());
        s.empty_lists += l.empty() ? 1 : 0;
        for (DocNum d : l.docs) {
            has_posting[d] = true;
        }
    }
    s.empty_docs = static_cast<std::size_t>(std::count(has_posting.begin(), has_posting.end(), false));
    s.serialized_bytes = serialized_size(index);
    return s;
}

}  // namespace spix
