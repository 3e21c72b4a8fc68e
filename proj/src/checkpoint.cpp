#include "mdlab/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "mdlab/errors.hpp"

namespace mdlab {

namespace {

constexpr char kMagic[8] = {'M', 'D', 'L', 'A', 'B', 'C', 'K', '\0'};
constexpr uint32_t kFormatVersion = 1;

void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

void put_bytes(std::string& buf, const void* p, size_t n) {
    buf.append(static_cast<const char*>(p), n);
}

void put_string(std::string& buf, const std::string& s) {
    put_u64(buf, s.size());
    buf.append(s);
}

void put_doubles(std::string& buf, const std::vector<double>& v) {
    put_u64(buf, v.size());
    put_bytes(buf, v.data(), v.size() * sizeof(double));
}

struct Reader {
    const char* p;
    const char* end;
    std::string where;

    void need(size_t n) const {
        if (static_cast<size_t>(end - p) < n) {
            throw DataError("checkpoint: truncated payload in " + where);
        }
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
        }
        p += 8;
        return v;
    }
    std::string str() {
        uint64_t n = u64();
        need(n);
        std::string s(p, p + n);
        p += n;
        return s;
    }
    std::vector<double> doubles() {
        uint64_t n = u64();
        need(n * sizeof(double));
        std::vector<double> v(n);
        std::memcpy(v.data(), p, n * sizeof(double));
        p += n * sizeof(double);
        return v;
    }
};

}  // namespace

uint64_t fnv1a64(const void* bytes, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

void save_checkpoint(const std::string& path, const CheckpointData& data) {
    std::string payload;
    put_string(payload, data.run_config_text);
    put_string(payload, data.vocab_text);
    const ModelConfig& mc = data.model_config;
    put_u64(payload, static_cast<uint64_t>(mc.layers));
    put_u64(payload, static_cast<uint64_t>(mc.hidden_dim));
    put_u64(payload, static_cast<uint64_t>(mc.heads));
    put_u64(payload, static_cast<uint64_t>(mc.ffn_dim));
    put_u64(payload, static_cast<uint64_t>(mc.vocab_size));
    put_u64(payload, static_cast<uint64_t>(mc.max_seq_len));
    put_u64(payload, static_cast<uint64_t>(mc.timestep_dim));
    put_u64(payload, mc.time_conditioning ? 1 : 0);
    put_u64(payload, data.seed);
    put_u64(payload, data.next_step);
    put_u64(payload, data.total_steps);
    put_doubles(payload, data.params);
    put_doubles(payload, data.adam_m);
    put_doubles(payload, data.adam_v);

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("checkpoint: cannot write " + path);
    }
    out.write(kMagic, sizeof(kMagic));
    uint32_t version = kFormatVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    uint64_t size = payload.size();
    uint64_t hash = fnv1a64(payload.data(), payload.size());
    std::string head;
    put_u64(head, size);
    put_u64(head, hash);
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) {
        throw DataError("checkpoint: write failed for " + path);
    }
}

CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("checkpoint: cannot open " + path);
    }
    char magic[8];
    uint32_t version = 0;
    char head[16];
    if (!in.read(magic, sizeof(magic)) ||
        !in.read(reinterpret_cast<char*>(&version), sizeof(version)) ||
        !in.read(head, sizeof(head))) {
        throw DataError("checkpoint: truncated header in " + path);
    }
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("checkpoint: bad magic in " + path);
    }
    if (version != kFormatVersion) {
        throw DataError("checkpoint: format version " + std::to_string(version) +
                        " unsupported (expected " + std::to_string(kFormatVersion) + ")");
    }
    uint64_t size = 0, hash = 0;
    for (int i = 0; i < 8; ++i) {
        size |= static_cast<uint64_t>(static_cast<unsigned char>(head[i])) << (8 * i);
        hash |= static_cast<uint64_t>(static_cast<unsigned char>(head[8 + i])) << (8 * i);
    }
    std::string payload(size, '\0');
    if (!in.read(payload.data(), static_cast<std::streamsize>(size))) {
        throw DataError("checkpoint: truncated payload in " + path);
    }
    if (fnv1a64(payload.data(), payload.size()) != hash) {
        throw DataError("checkpoint: integrity hash mismatch in " + path);
    }

    Reader r{payload.data(), payload.data() + payload.size(), path};
    CheckpointData data;
    data.run_config_text = r.str();
    data.vocab_text = r.str();
    data.model_config.layers = static_cast<int>(r.u64());
    data.model_config.hidden_dim = static_cast<int>(r.u64());
    data.model_config.heads = static_cast<int>(r.u64());
    data.model_config.ffn_dim = static_cast<int>(r.u64());
    data.model_config.vocab_size = static_cast<int>(r.u64());
    data.model_config.max_seq_len = static_cast<int>(r.u64());
    data.model_config.timestep_dim = static_cast<int>(r.u64());
    data.model_config.time_conditioning = r.u64() != 0;
    data.seed = r.u64();
    data.next_step = r.u64();
    data.total_steps = r.u64();
    data.params = r.doubles();
    data.adam_m = r.doubles();
    data.adam_v = r.doubles();
    return data;
}

}  // namespace mdlab
