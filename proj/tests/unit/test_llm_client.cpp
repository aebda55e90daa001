#include <doctest.h>

#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "persona/errors.hpp"
#include "persona/llm_client.hpp"
#include "support/fixtures.hpp"

using namespace persona;
using nlohmann::json;

namespace {

// Local OpenAI-style endpoint; each test installs its own handler.
class FakeServer {
public:
    using Handler = std::function<void(const json& body, const httplib::Request&, httplib::Response&)>;

    explicit FakeServer(Handler h) : handler_(std::move(h)) {
        auto route = [this](const httplib::Request& req, httplib::Response& res) {
            ++hits_;
            json body;
            try {
                body = json::parse(req.body);
            } catch (...) {
            }
            {
                std::lock_guard lock(mu_);
                bodies_.push_back(body);
                paths_.push_back(req.path);
                auth_ = req.get_header_value("Authorization");
            }
            handler_(body, req, res);
        };
        server_.Post("/v1/chat/completions", route);
        server_.Post("/v1/embeddings", route);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    int hits() const { return hits_.load(); }
    std::vector<json> bodies() {
        std::lock_guard lock(mu_);
        return bodies_;
    }
    std::vector<std::string> paths() {
        std::lock_guard lock(mu_);
        return paths_;
    }
    std::string auth() {
        std::lock_guard lock(mu_);
        return auth_;
    }

private:
    Handler handler_;
    httplib::Server server_;
    std::thread thread_;
    int port_{0};
    std::atomic<int> hits_{0};
    std::mutex mu_;
    std::vector<json> bodies_;
    std::vector<std::string> paths_;
    std::string auth_;
};

std::string completion(const std::string& text) {
    return json{{"choices", json::array({json{{"message", {{"role", "assistant"}, {"content", text}}}}})}}.dump();
}

EndpointConfig fast(const std::string& url) {
    EndpointConfig c;
    c.base_url = url;
    c.api_key = "sk-test";
    c.timeout = std::chrono::seconds(5);
    c.retry.max_retries = 3;
    c.retry.base_delay = std::chrono::milliseconds(1);
    c.retry.max_delay = std::chrono::milliseconds(5);
    return c;
}

ChatRequest request(std::string system = "You are a human with the following personality: INTJ.") {
    ChatRequest r;
    r.model = "test-model";
    r.system = std::move(system);
    r.user = "Q: You regularly make new friends.";
    r.params.temperature = 0.7;
    r.params.request_seed = 42;
    return r;
}

}  // namespace

TEST_CASE("chat request wire format") {
    FakeServer srv([](const json&, const httplib::Request&, httplib::Response& res) {
        res.set_content(completion("Generally Agree"), "application/json");
    });
    HttpChatClient client(fast(srv.url()));
    CHECK(client.chat(request()) == "Generally Agree");

    const auto body = srv.bodies().at(0);
    CHECK(body["model"] == "test-model");
    REQUIRE(body["messages"].size() == 2);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["role"] == "user");
    CHECK(body["messages"][1]["content"] == "Q: You regularly make new friends.");
    CHECK(body["temperature"].get<double>() == doctest::Approx(0.7));
    CHECK(body["top_p"].get<double>() == doctest::Approx(1.0));
    CHECK(body["top_k"] == 50);
    CHECK(body["max_tokens"] == 256);
    CHECK(body["seed"] == 42);
    CHECK(srv.auth() == "Bearer sk-test");
    CHECK(srv.paths().at(0) == "/v1/chat/completions");
}

TEST_CASE("empty system message is omitted and /v1 prefix is not doubled") {
    FakeServer srv([](const json&, const httplib::Request&, httplib::Response& res) {
        res.set_content(completion("Agree"), "application/json");
    });
    HttpChatClient client(fast(srv.url() + "/v1/"));
    client.chat(request(""));
    const auto body = srv.bodies().at(0);
    REQUIRE(body["messages"].size() == 1);
    CHECK(body["messages"][0]["role"] == "user");
    CHECK(srv.paths().at(0) == "/v1/chat/completions");
}

TEST_CASE("server errors are retried") {
    std::atomic<int> n{0};
    FakeServer srv([&](const json&, const httplib::Request&, httplib::Response& res) {
        if (n++ < 2) {
            res.status = 503;
            res.set_content("busy", "text/plain");
            return;
        }
        res.set_content(completion("Agree"), "application/json");
    });
    HttpChatClient client(fast(srv.url()));
    CHECK(client.chat(request()) == "Agree");
    CHECK(srv.hits() == 3);
    CHECK(client.metrics().retries.load() == 2);
}

TEST_CASE("persistent 429 raises RateLimited after max_retries + 1 attempts") {
    FakeServer srv([](const json&, const httplib::Request&, httplib::Response& res) {
        res.status = 429;
        res.set_content("slow down", "text/plain");
    });
    HttpChatClient client(fast(srv.url()));
    CHECK_THROWS_AS(client.chat(request()), RateLimited);
    CHECK(srv.hits() == 4);
}

TEST_CASE("persistent 500 raises HttpError") {
    FakeServer srv([](const json&, const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    HttpChatClient client(fast(srv.url()));
    try {
        client.chat(request());
        FAIL("expected HttpError");
    } catch (const HttpError& e) {
        CHECK(e.status() == 500);
    }
    CHECK(srv.hits() == 4);
}

TEST_CASE("client errors are not retried") {
    FakeServer srv([](const json&, const httplib::Request&, httplib::Response& res) {
        res.status = 404;
        res.set_content("{\"error\":\"model not found\"}", "application/json");
    });
    HttpChatClient client(fast(srv.url()));
    try {
        client.chat(request());
        FAIL("expected HttpError");
    } catch (const HttpError& e) {
        CHECK(e.status() == 404);
        CHECK(std::string(e.what()).find("model not found") != std::string::npos);
    }
    CHECK(srv.hits() == 1);
}

TEST_CASE("endpoint rejecting top_k gets one warning and top_k is dropped") {
    FakeServer srv([](const json& body, const httplib::Request&, httplib::Response& res) {
        if (body.contains("top_k")) {
            res.status = 400;
            res.set_content("{\"error\":\"unrecognized parameter top_k\"}", "application/json");
            return;
        }
        res.set_content(completion("Agree"), "application/json");
    });
    HttpChatClient client(fast(srv.url()));
    CHECK(client.chat(request()) == "Agree");
    CHECK_FALSE(client.top_k_enabled());
    CHECK(client.chat(request()) == "Agree");
    const auto bodies = srv.bodies();
    REQUIRE(bodies.size() == 3);
    CHECK(bodies[0].contains("top_k"));
    CHECK_FALSE(bodies[1].contains("top_k"));
    CHECK_FALSE(bodies[2].contains("top_k"));
}

TEST_CASE("empty completion") {
    FakeServer srv([](const json&, const httplib::Request&, httplib::Response& res) {
        res.set_content(completion("   "), "application/json");
    });
    HttpChatClient client(fast(srv.url()));
    CHECK_THROWS_AS(client.chat(request()), EmptyCompletion);
}

TEST_CASE("unreachable endpoint raises NetworkError") {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    auto cfg = fast("http://127.0.0.1:" + std::to_string(port));
    cfg.retry.max_retries = 1;
    HttpChatClient client(cfg);
    CHECK_THROWS_AS(client.chat(request()), NetworkError);
}

TEST_CASE("invalid sampling parameters are rejected before sending") {
    FakeServer srv([](const json&, const httplib::Request&, httplib::Response& res) {
        res.set_content(completion("Agree"), "application/json");
    });
    HttpChatClient client(fast(srv.url()));
    auto r = request();
    r.params.top_p = 0.0;
    CHECK_THROWS_AS(client.chat(r), InvalidSpec);
    CHECK(srv.hits() == 0);
}

TEST_CASE("malformed base URL") {
    CHECK_THROWS_AS(parse_base_url("localhost:8000"), ConfigError);
    const auto u = parse_base_url("http://localhost:8000/api/v1/");
    CHECK(u.origin == "http://localhost:8000");
    CHECK(u.path_prefix == "/api/v1");
}

TEST_CASE("retry delay stays within the full-jitter envelope") {
    RetryPolicy p;
    for (int attempt = 0; attempt < 10; ++attempt) {
        const auto cap = std::min<double>(30000, 500 * std::pow(2.0, attempt));
        for (std::uint64_t d = 0; d < 50; ++d) {
            const auto ms = p.delay(attempt, d).count();
            CHECK(ms >= 0);
            CHECK(static_cast<double>(ms) <= cap);
        }
    }
}

TEST_CASE("http embedder caches and checks dimension") {
    std::atomic<int> dim{3};
    FakeServer srv([&](const json& body, const httplib::Request&, httplib::Response& res) {
        CHECK(body["model"] == "embed-model");
        json v = json::array();
        for (int i = 0; i < dim.load(); ++i) v.push_back(0.5 * (i + 1));
        res.set_content(json{{"data", json::array({json{{"embedding", v}}})}}.dump(), "application/json");
    });
    HttpEmbedder e(fast(srv.url()), "embed-model");
    CHECK(e.embed("hello") == std::vector<double>{0.5, 1.0, 1.5});
    CHECK(e.embed("hello") == std::vector<double>{0.5, 1.0, 1.5});
    CHECK(srv.hits() == 1);
    CHECK(srv.paths().at(0) == "/v1/embeddings");
    dim = 4;
    CHECK_THROWS_AS(e.embed("other"), DimensionMismatch);
}

TEST_CASE("precomputed embedder") {
    PrecomputedEmbedder e({{"a", {1.0, 0.0}}, {"b", {0.0, 1.0}}});
    CHECK(e.embed("b") == std::vector<double>{0.0, 1.0});
    CHECK_THROWS_AS(e.embed("c"), MissingVector);
    CHECK_THROWS_AS(PrecomputedEmbedder({{"a", {1.0}}, {"b", {1.0, 2.0}}}), DimensionMismatch);

    testing::TempDir dir;
    {
        std::ofstream f(dir / "v.json");
        f << R"({"x": [0.1, 0.2, 0.3]})";
    }
    auto loaded = PrecomputedEmbedder::load(dir / "v.json");
    CHECK(loaded.embed("x").size() == 3);
    CHECK_THROWS_AS(PrecomputedEmbedder::load(dir / "missing.json"), ConfigError);
}

TEST_CASE("hashing embedder is deterministic and case-insensitive") {
    HashingEmbedder e;
    const auto a = e.embed("Quiet thinkers");
    CHECK(a.size() == 512);
    CHECK(a == e.embed("quiet, THINKERS"));
    CHECK(a != e.embed("loud talkers"));
}
