#pragma once

// Local chat-completion server for offline elicitation tests.

#include <atomic>
#include <functional>
#include <regex>
#include <set>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace stub {

/// Answers pairwise questions YES for the listed "cause->effect" pairs and
/// returns `whole_graph` for any other prompt. Status 500 when `fail` is set.
class LlmServer {
public:
    LlmServer(std::set<std::string> yes_pairs, std::string whole_graph, bool fail = false)
        : yes_(std::move(yes_pairs)), whole_(std::move(whole_graph)), fail_(fail) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests_;
            if (fail_) {
                res.status = 500;
                return;
            }
            const auto body = nlohmann::json::parse(req.body);
            const std::string prompt = body.at("messages").at(0).at("content").get<std::string>();
            static const std::regex q(R"(an edge (\S+) -> (\S+)\))");
            std::smatch m;
            std::string answer = whole_;
            if (std::regex_search(prompt, m, q))
                answer = yes_.count(m[1].str() + "->" + m[2].str()) ? "It does.\nANSWER: YES"
                                                                     : "It does not.\nANSWER: NO";
            const nlohmann::json reply = {
                {"choices", nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", answer}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~LlmServer() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    }
    std::size_t requests() const { return requests_; }

private:
    httplib::Server server_;
    std::set<std::string> yes_;
    std::string whole_;
    bool fail_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<std::size_t> requests_{0};
};

}  // namespace stub
