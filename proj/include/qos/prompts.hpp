#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qos/wsdream.hpp"

namespace qos {

enum class EntityKind : std::uint8_t { user = 0, service = 1 };

std::string_view to_string(EntityKind kind);
EntityKind parse_entity_kind(std::string_view s);

struct PromptText {
    EntityKind entity_kind = EntityKind::user;
    std::uint32_t entity_id = 0;
    std::string text;

    bool operator==(const PromptText&) const = default;
};

// Only textual attributes are used; IP, IP number and coordinates never
// enter a sentence.
PromptText build_user_sentence(const UserRecord& user);
PromptText build_service_sentence(const ServiceRecord& service);

/// Hex FNV-1a 64 of both sentence templates; changes whenever a template does.
std::string template_hash();

struct PromptManifest {
    std::string template_hash;
    std::vector<PromptText> prompts;
};

PromptManifest build_prompt_manifest(const std::vector<UserRecord>& users, const std::vector<ServiceRecord>& services);

// Header "#template_hash=<hex>", then "{kind}\t{id}\t{sentence}" per line.
void write_prompt_manifest(const PromptManifest& manifest, const std::filesystem::path& path);
PromptManifest read_prompt_manifest(const std::filesystem::path& path);

}  // namespace qos
