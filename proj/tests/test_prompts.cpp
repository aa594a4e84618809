#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "qos/prompts.hpp"

using namespace qos;

TEST_CASE("user sentence matches the published example") {
    UserRecord u{0, "131.247.1.1", "United States", "2214002945", "AS5661 USF - UNIVERSITY OF SOUTH FLORIDA",
                 "28.0587", "-82.4139"};
    const auto p = build_user_sentence(u);
    CHECK(p.entity_kind == EntityKind::user);
    CHECK(p.entity_id == 0);
    CHECK(p.text == "web user, located in United States, in autonomous system AS5661 USF - UNIVERSITY OF SOUTH FLORIDA.");
}

TEST_CASE("service sentence matches the published example") {
    ServiceRecord s{42,
                    "http://biomoby.org/services/wsdl/ualberta.ca/DrugBankByName",
                    "ualberta.ca",
                    "129.128.1.1",
                    "Canada",
                    "2172649729",
                    "AS3359 University of Alberta",
                    "53.55",
                    "-113.5"};
    const auto p = build_service_sentence(s);
    CHECK(p.entity_kind == EntityKind::service);
    CHECK(p.entity_id == 42);
    CHECK(p.text ==
          "web service, at url http://biomoby.org/services/wsdl/ualberta.ca/DrugBankByName, hosted by ualberta.ca, "
          "located in Canada, in autonomous system AS3359 University of Alberta.");
}

TEST_CASE("templates substitute verbatim") {
    CHECK(build_user_sentence({1, "ip", "X", "n", "Y", "0", "0"}).text == "web user, located in X, in autonomous system Y.");
    CHECK(build_service_sentence({1, "u", "p", "ip", "c", "n", "a", "0", "0"}).text ==
          "web service, at url u, hosted by p, located in c, in autonomous system a.");
    // Placeholders are interpolated as-is.
    CHECK(build_user_sentence({1, "ip", "null", "n", "null", "0", "0"}).text ==
          "web user, located in null, in autonomous system null.");
}

TEST_CASE("numeric attributes never reach a sentence") {
    UserRecord u{5, "203.0.113.77", "Japan", "3405803853", "AS2500 WIDE", "35.6895", "139.6917"};
    ServiceRecord s{6, "http://svc.example/ws?wsdl", "svc.example", "198.51.100.23", "Brazil", "3325256727",
                    "AS1916 RNP", "-15.78", "-47.93"};
    const auto ut = build_user_sentence(u).text;
    const auto st = build_service_sentence(s).text;
    for (const auto& tok : {u.ip_address, u.ip_number, u.latitude, u.longitude}) CHECK(ut.find(tok) == std::string::npos);
    for (const auto& tok : {s.ip_address, s.ip_number, s.latitude, s.longitude}) CHECK(st.find(tok) == std::string::npos);
    CHECK(ut.back() == '.');
    CHECK(st.back() == '.');
}

TEST_CASE("prompt manifest roundtrip") {
    std::vector<UserRecord> users{{0, "a", "Germany", "1", "AS1 A", "0", "0"}, {1, "b", "Japan", "2", "AS2 B", "0", "0"}};
    std::vector<ServiceRecord> services{{0, "http://u", "p", "ip", "Canada", "n", "AS3 C", "0", "0"}};
    const auto m = build_prompt_manifest(users, services);
    CHECK(m.prompts.size() == 3);
    CHECK(m.template_hash == template_hash());
    CHECK(m.template_hash.size() == 16);

    const auto path = std::filesystem::temp_directory_path() / "qos_test_prompts.tsv";
    write_prompt_manifest(m, path);
    const auto back = read_prompt_manifest(path);
    CHECK(back.template_hash == m.template_hash);
    CHECK(back.prompts == m.prompts);

    std::ifstream in(path);
    std::string first, second;
    std::getline(in, first);
    std::getline(in, second);
    CHECK(first == "#template_hash=" + m.template_hash);
    CHECK(second == "user\t0\tweb user, located in Germany, in autonomous system AS1 A.");
}
