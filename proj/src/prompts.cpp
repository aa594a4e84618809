#include "qos/prompts.hpp"

#include <cstdio>
#include <fstream>

#include "qos/errors.hpp"
#include "qos/rng.hpp"

namespace qos {

namespace {

constexpr std::string_view kUserTemplate = "web user, located in {country}, in autonomous system {as}.";
constexpr std::string_view kServiceTemplate =
    "web service, at url {url}, hosted by {provider}, located in {country}, in autonomous system {as}.";

}  // namespace

std::string_view to_string(EntityKind kind) { return kind == EntityKind::user ? "user" : "service"; }

EntityKind parse_entity_kind(std::string_view s) {
    if (s == "user") return EntityKind::user;
    if (s == "service") return EntityKind::service;
    throw FormatError("unknown entity kind '" + std::string(s) + "'");
}

PromptText build_user_sentence(const UserRecord& user) {
    std::string text = "web user, located in ";
    text += user.country;
    text += ", in autonomous system ";
    text += user.autonomous_system;
    text += '.';
    return {EntityKind::user, user.user_id, std::move(text)};
}

PromptText build_service_sentence(const ServiceRecord& service) {
    std::string text = "web service, at url ";
    text += service.wsdl_address;
    text += ", hosted by ";
    text += service.provider;
    text += ", located in ";
    text += service.country;
    text += ", in autonomous system ";
    text += service.autonomous_system;
    text += '.';
    return {EntityKind::service, service.service_id, std::move(text)};
}

std::string template_hash() {
    Fnv1a64 h;
    h.update(kUserTemplate);
    h.update("\n");
    h.update(kServiceTemplate);
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h.digest()));
    return hex;
}

PromptManifest build_prompt_manifest(const std::vector<UserRecord>& users, const std::vector<ServiceRecord>& services) {
    PromptManifest m;
    m.template_hash = template_hash();
    m.prompts.reserve(users.size() + services.size());
    for (const auto& u : users) m.prompts.push_back(build_user_sentence(u));
    for (const auto& s : services) m.prompts.push_back(build_service_sentence(s));
    return m;
}

void write_prompt_manifest(const PromptManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "#template_hash=" << manifest.template_hash << '\n';
    for (const auto& p : manifest.prompts) {
        out << to_string(p.entity_kind) << '\t' << p.entity_id << '\t' << p.text << '\n';
    }
}

PromptManifest read_prompt_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    PromptManifest m;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            constexpr std::string_view prefix = "#template_hash=";
            if (line.rfind(prefix, 0) != 0) throw ParseError(path.string(), 1, "missing template hash header");
            m.template_hash = line.substr(prefix.size());
            continue;
        }
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) throw ParseError(path.string(), line_no, "expected kind<TAB>id<TAB>sentence");
        PromptText p;
        p.entity_kind = parse_entity_kind(std::string_view(line).substr(0, t1));
        try {
            p.entity_id = static_cast<std::uint32_t>(std::stoul(line.substr(t1 + 1, t2 - t1 - 1)));
        } catch (const std::exception&) {
            throw ParseError(path.string(), line_no, "invalid id");
        }
        p.text = line.substr(t2 + 1);
        m.prompts.push_back(std::move(p));
    }
    return m;
}

}  // namespace qos
