"""Health endpoint tests."""


def test_health_endpoint(client):
    """Test basic health check returns 200."""
    response = client.get("/health")
    assert response.status_code == 200
    data = response.json()
    assert data["status"] == "healthy"


def test_ready_endpoint(client):
    """Test readiness check reports the Monte Carlo limits."""
    response = client.get("/ready")
    assert response.status_code == 200
    data = response.json()
    assert data["status"] == "ready"
    assert data["api_max_rounds"] >= 1
    assert data["mc_workers"] >= 1


def test_request_id_header(client):
    """Test requests get unique request IDs."""
    first = client.get("/health").headers["X-Request-ID"]
    second = client.get("/health").headers["X-Request-ID"]
    assert first != second


def test_incoming_request_id_is_kept(client):
    """Test a caller-supplied request ID is echoed back."""
    response = client.get("/health", headers={"X-Request-ID": "trace-7"})
    assert response.headers["X-Request-ID"] == "trace-7"
