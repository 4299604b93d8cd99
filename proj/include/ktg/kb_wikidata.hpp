#pragma once

// Live Wikidata backend over the wbgetentities REST endpoint.
// Compile with CPPHTTPLIB_OPENSSL_SUPPORT for https.

#include <optional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "ktg/kb_client.hpp"

namespace ktg {

class WikidataBackend : public KbBackend {
 public:
  explicit WikidataBackend(std::string host = "https://www.wikidata.org")
      : host_(std::move(host)) {}

  bool id_valid(const std::string& id) const override {
    if (id.size() < 2 || (id[0] != 'Q' && id[0] != 'P')) return false;
    for (size_t k = 1; k < id.size(); ++k)
      if (!std::isdigit(static_cast<unsigned char>(id[k]))) return false;
    return true;
  }

  std::optional<AuxRecord> fetch(const std::string& id) override {
    nlohmann::json ent = get_entity(id);
    if (ent.is_null()) return std::nullopt;
    AuxRecord rec;
    if (ent.contains("descriptions") && ent["descriptions"].contains("en"))
      rec.description = ent["descriptions"]["en"].value("value", "");
    // domain = label of the instance-of (P31) target
    if (ent.contains("claims") && ent["claims"].contains("P31")) {
      const auto& claims = ent["claims"]["P31"];
      if (!claims.empty()) {
        const auto& snak = claims[0]["mainsnak"];
        if (snak.value("snaktype", "") == "value") {
          std::string target = snak["datavalue"]["value"].value("id", "");
          if (!target.empty()) {
            nlohmann::json tent = get_entity(target);
            if (!tent.is_null() && tent.contains("labels") && tent["labels"].contains("en"))
              rec.domain = tent["labels"]["en"].value("value", "");
          }
        }
      }
    }
    // property hierarchy is not exposed by wbgetentities; the [root, id]
    // fallback in KbClient applies
    return rec;
  }

  AuxSource source_kind() const override { return AuxSource::Live; }

 private:
  nlohmann::json get_entity(const std::string& id) {
    httplib::Client cli(host_);
    cli.set_connection_timeout(10);
    cli.set_read_timeout(10);
    std::string path =
        "/w/api.php?action=wbgetentities&format=json&languages=en"
        "&props=labels%7Cdescriptions%7Cclaims&ids=" + id;
    auto res = cli.Get(path);
    if (!res) throw TransportError("wikidata request failed for " + id);
    if (res->status != 200)
      throw TransportError("wikidata http status " + std::to_string(res->status));
    nlohmann::json j = nlohmann::json::parse(res->body);
    if (!j.contains("entities") || !j["entities"].contains(id)) return nullptr;
    const auto& ent = j["entities"][id];
    if (ent.contains("missing")) return nullptr;
    return ent;
  }

  std::string host_;
};

}  // namespace ktg
