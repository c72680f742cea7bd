"""Black-box sidecar contract suite.

Runs against any conforming deployment named by RCG_SIDECAR_URL; skipped
otherwise (the primary suite never needs the sidecar).
"""

import os

import pytest

from sidecar_contract import (
    check_embed_contract,
    check_generate_contract,
    check_health,
)

SIDECAR_URL = os.environ.get("RCG_SIDECAR_URL")

pytestmark = pytest.mark.skipif(
    not SIDECAR_URL, reason="set RCG_SIDECAR_URL to run the sidecar contract suite"
)


@pytest.fixture(scope="module")
def health():
    return check_health(SIDECAR_URL)


def test_health_advertises_dimension(health):
    assert health["status"] == "ok"
    assert health["dimension"] >= 1


def test_embed_contract(health):
    check_embed_contract(SIDECAR_URL, health["dimension"])


def test_generate_contract(health):
    if not health.get("gen_model"):
        pytest.skip("embedding-only deployment")
    check_generate_contract(SIDECAR_URL)
