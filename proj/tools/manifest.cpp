// SPDX-License-Identifier: Apache-2.0
#include "manifest.hpp"

#include <array>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include <json.hpp>

#include "fastsae/error.hpp"

#ifndef FASTSAE_VERSION
#define FASTSAE_VERSION "unknown"
#endif

namespace fastsae::cli {

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for hashing");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error(ErrorKind::io, "sha256 init failed");
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    if (in.bad()) throw IoError("read error while hashing " + path.string());
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::filesystem::path RunManifest::write() const {
    if (outputs.empty()) throw ContractError("manifest needs at least one output");
    nlohmann::ordered_json j;
    j["engine_version"] = FASTSAE_VERSION;
    j["command"] = command;
    j["config"] = config;
    j["seeds"] = seeds;
    auto files = [](const std::vector<std::filesystem::path>& paths) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& p : paths) arr.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
        return arr;
    };
    j["inputs"] = files(inputs);
    j["outputs"] = files(outputs);

    std::filesystem::path dest = outputs.front();
    dest += ".manifest.json";
    std::ofstream os(dest);
    if (!os) throw IoError("cannot write " + dest.string());
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write failed: " + dest.string());
    return dest;
}

}  // namespace fastsae::cli
