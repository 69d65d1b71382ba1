#include "doctest.h"

#include "etholabel/digest.hpp"

using namespace etholabel;

TEST_CASE("sha256 matches FIPS 180-4 test vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("sha256 handles block boundaries") {
    // 55, 56 and 64 byte messages exercise one- and two-block padding.
    std::string a(55, 'x');
    std::string b(56, 'x');
    std::string c(64, 'x');
    CHECK(sha256_hex(a) != sha256_hex(b));
    CHECK(sha256_hex(b) != sha256_hex(c));
    CHECK(sha256_hex(a).size() == 64);
    CHECK(sha256_hex_short(a) == sha256_hex(a).substr(0, 16));
}
