"""
SK Thermography - API Endpoint Tests

This module contains integration tests for the API endpoints:
- Health check and presets
- Kernel axioms
- Enhancement
- Segmentation
- I_tb and comparison
- Error responses

Author: SK Thermography Team

Run with: pytest backend/app/tests/test_endpoints.py -v
"""

import numpy as np
import pytest
from fastapi.testclient import TestClient


# ===========================================
# Test Client Fixture
# ===========================================

@pytest.fixture
def client():
    """Create a test client for the FastAPI app."""
    from app.main import app
    return TestClient(app)


@pytest.fixture
def bimodal_matrix():
    """40x40 matrix: cold stripe at 20 C, field at 23 C, seeded noise."""
    rng = np.random.default_rng(12)
    values = np.full((40, 40), 23.0)
    values[:, 15:25] = 20.0
    return (values + rng.normal(0.0, 0.2, size=values.shape)).tolist()


# ===========================================
# Health Endpoint Tests
# ===========================================

class TestHealthEndpoint:
    """Tests for /api/v1/health endpoint."""

    def test_health_check(self, client):
        """Health endpoint should return healthy status."""
        response = client.get("/api/v1/health")

        assert response.status_code == 200
        data = response.json()
        assert data["status"] == "healthy"
        assert "timestamp" in data
        assert data["version"] == "1.0.0"

    def test_root_endpoint(self, client):
        """Root endpoint should return welcome message."""
        response = client.get("/")

        assert response.status_code == 200
        assert "Welcome" in response.json()["message"]

    def test_presets(self, client):
        """Every named preset is listed with its kernel."""
        response = client.get("/api/v1/presets")

        assert response.status_code == 200
        data = response.json()
        assert data["paper-thermo"]["kernel"] == "jackson:12:1"
        assert set(data) >= {"paper-thermo", "bspline-fast", "fejer-smooth"}


# ===========================================
# Kernel Endpoint Tests
# ===========================================

class TestKernelEndpoint:
    """Tests for /api/v1/kernels/{spec}/axioms."""

    def test_bspline_axioms(self, client):
        response = client.get("/api/v1/kernels/bspline:3/axioms")

        assert response.status_code == 200
        data = response.json()
        assert data["kernel"] == "bspline:3"
        assert data["support_radius"] == 1.5
        assert data["partition_of_unity_max_deviation"] < 1e-10

    def test_unknown_kernel(self, client):
        """Bad specs give a 422 with the error code."""
        response = client.get("/api/v1/kernels/gauss:2/axioms")

        assert response.status_code == 422
        assert response.json()["error_code"] == "invalid_parameter"


# ===========================================
# Enhancement Endpoint Tests
# ===========================================

class TestEnhanceEndpoint:
    """Tests for /api/v1/enhance."""

    def test_enhance_doubles_grid(self, client):
        payload = {"values": [[20.0, 21.0], [22.0, 23.0]], "preset": "bspline-fast"}
        response = client.post("/api/v1/enhance", json=payload)

        assert response.status_code == 200
        data = response.json()
        assert np.asarray(data["values"]).shape == (4, 4)
        assert data["report"]["output_shape"] == [4, 4]
        assert data["report"]["kernel"] == "bspline:3"
        assert set(data["report"]["memory_estimates"]) == {"recompute", "precompute"}

    def test_overrides(self, client):
        payload = {"values": [[1.0] * 3] * 3, "preset": "bspline-fast", "R": 1.0, "strategy": "recompute"}
        data = client.post("/api/v1/enhance", json=payload).json()

        assert data["report"]["strategy"] == "recompute"
        assert np.allclose(data["values"], 1.0)

    def test_ragged_matrix(self, client):
        response = client.post("/api/v1/enhance", json={"values": [[1.0, 2.0], [3.0]]})

        assert response.status_code == 422
        assert response.json()["error_code"] == "invalid_parameter"

    def test_unknown_preset(self, client):
        response = client.post("/api/v1/enhance", json={"values": [[1.0]], "preset": "nope"})

        assert response.status_code == 422
        assert "available" in response.json()["detail"]

    def test_schema_validation(self, client):
        """Out-of-range fields are rejected by request validation."""
        response = client.post("/api/v1/enhance", json={"values": [[1.0]], "R": 0.5})

        assert response.status_code == 422


# ===========================================
# Segmentation Endpoint Tests
# ===========================================

class TestSegmentEndpoint:
    """Tests for /api/v1/segment."""

    def test_segment_stripe(self, client, bimodal_matrix):
        response = client.post("/api/v1/segment", json={"values": bimodal_matrix, "bins": 32})

        assert response.status_code == 200
        data = response.json()
        assert 20.0 < data["threshold"]["T_m"] < 23.0
        assert data["segmentation"]["bridge_area"] == 400
        assert np.asarray(data["mask"]).shape == (40, 40)
        assert len(data["contours"]) == data["segmentation"]["contour_pixels"]
        assert data["histogram"]["bins"] == 32

    def test_constant_matrix(self, client):
        response = client.post("/api/v1/segment", json={"values": [[21.0, 21.0], [21.0, 21.0]]})

        assert response.status_code == 422
        assert response.json()["error_code"] == "degenerate_histogram"

    def test_unimodal_matrix(self, client):
        """Fewer than two maxima is a numeric failure."""
        values = [[float(v) for v in np.repeat(np.arange(9.0), [1, 2, 3, 4, 5, 4, 3, 2, 1])]]
        response = client.post("/api/v1/segment", json={"values": values, "bins": 9, "smooth": 1})

        assert response.status_code == 500
        data = response.json()
        assert data["error_code"] == "unimodal_data"
        assert data["diagnostic"]["maxima"] == 1


# ===========================================
# Energy Index Endpoint Tests
# ===========================================

class TestItbEndpoints:
    """Tests for /api/v1/itb and /api/v1/itb/compare."""

    def test_explicit_temperatures(self, client):
        payload = {"temps": [16.0, 16.0, 16.0], "t_inside": 20.0, "t_1d": 17.0}
        data = client.post("/api/v1/itb", json=payload).json()

        assert data["I_tb"] == pytest.approx(4.0 / 3.0)
        assert data["N"] == 3

    def test_line_through_matrix(self, client):
        payload = {
            "values": [[16.0, 17.0, 18.0], [19.0, 20.0, 21.0]],
            "line": "1,1:1,3",
            "t_inside": 20.0,
            "t_1d": 17.0,
            "source": "enhanced",
        }
        data = client.post("/api/v1/itb", json=payload).json()

        assert data["line"] == [[1, 1], [1, 2], [1, 3]]
        assert data["I_tb"] == pytest.approx((4 + 3 + 2) / 9.0)
        assert data["source"] == "enhanced"

    def test_missing_inputs(self, client):
        response = client.post("/api/v1/itb", json={"t_inside": 20.0, "t_1d": 17.0})

        assert response.status_code == 422

    def test_division_by_zero(self, client):
        response = client.post("/api/v1/itb", json={"temps": [19.0], "t_inside": 20.0, "t_1d": 20.0})

        assert response.status_code == 500
        assert response.json()["error_code"] == "itb_division_by_zero"

    def test_compare(self, client):
        payload = {"raw": 1.611, "enhanced": 1.585, "reference": 1.439, "reported_improvement": 0.15}
        data = client.post("/api/v1/itb/compare", json=payload).json()

        assert data["improvement_percent"] == pytest.approx(15.12, abs=5e-3)
        assert [row["source"] for row in data["rows"]] == ["raw", "enhanced"]
        assert data["note"] == ""
