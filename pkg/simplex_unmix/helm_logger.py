"""
Helm log forwarding for long solver runs and bench sweeps.

When HELM_SERVICE_URL is set, records emitted under the `simplex_unmix`
logger are queued and a daemon thread POSTs them in batches to
`{helm_url}/api/logs/ingest`. If CORE_SERVICE_URL is also set, a bearer
token is requested from `{core_url}/service-token` first. Forwarding
problems are reported on the local logger only; they never reach the solver.
"""

import logging
import os
import queue
import threading
import time
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

import requests

logger = logging.getLogger(__name__)

# attributes a caller can attach with logger.info(..., extra={...})
RUN_CONTEXT_KEYS = ('algorithm', 'trial', 'cell', 'stage', 'iteration')


class HelmLogHandler(logging.Handler):
    """logging.Handler that hands formatted records to a HelmLogger."""

    def __init__(self, helm_logger: 'HelmLogger'):
        super().__init__()
        self.helm_logger = helm_logger

    def emit(self, record: logging.LogRecord):
        # the forwarder's own diagnostics stay local
        if record.name == __name__:
            return
        try:
            context = {'logger': record.name}
            for key in RUN_CONTEXT_KEYS:
                if hasattr(record, key):
                    context[key] = getattr(record, key)
            self.helm_logger.log(record.levelname, self.format(record), context)
        except Exception:
            self.handleError(record)


class HelmLogger:
    """
    Batches log entries and ships them to Helm from a background thread.

    Args:
        service_name: Name reported with every batch
        helm_url: Base URL of Helm (defaults to HELM_SERVICE_URL)
        core_url: Base URL issuing service tokens (defaults to CORE_SERVICE_URL);
            without it batches are sent unauthenticated
        batch_size: Entries per POST
        flush_interval: Seconds before a partial batch is sent anyway
        session: requests-compatible session, mainly for tests
    """

    def __init__(self, service_name: str, helm_url: Optional[str] = None,
                 core_url: Optional[str] = None, batch_size: int = 10,
                 flush_interval: float = 5, session=None):
        self.service_name = service_name
        self.helm_url = (helm_url or os.environ.get('HELM_SERVICE_URL', '')).rstrip('/')
        self.core_url = (core_url or os.environ.get('CORE_SERVICE_URL', '')).rstrip('/')
        self.batch_size = max(1, int(batch_size))
        self.flush_interval = flush_interval
        self.session = session or requests.Session()

        self.log_queue: 'queue.Queue[Dict[str, Any]]' = queue.Queue()
        self.stop_event = threading.Event()
        self.token: Optional[str] = None
        self.sent = 0

        self.sender_thread = threading.Thread(target=self._send_loop, name='helm-log-sender', daemon=True)
        self.sender_thread.start()

    def _get_service_token(self) -> Optional[str]:
        if self.token or not self.core_url:
            return self.token
        try:
            response = self.session.post(
                f"{self.core_url}/service-token",
                json={"calling_service": self.service_name, "target_service": "helm"},
                timeout=5,
            )
            if response.status_code == 200:
                self.token = response.json().get('token')
            else:
                logger.warning(f"Service token request failed: {response.status_code}")
        except requests.RequestException as e:
            logger.warning(f"Failed to get service token: {e}")
        return self.token

    def _send_batch(self, entries: List[Dict[str, Any]]):
        if not entries:
            return
        headers = {}
        token = self._get_service_token()
        if token:
            headers['Authorization'] = f"Bearer {token}"
        elif self.core_url:
            logger.warning(f"No service token, dropping {len(entries)} log entries")
            return
        try:
            response = self.session.post(
                f"{self.helm_url}/api/logs/ingest",
                json={"service_name": self.service_name, "logs": entries},
                headers=headers,
                timeout=5,
            )
            if response.status_code != 200:
                logger.warning(f"Helm rejected log batch: {response.status_code}")
            else:
                self.sent += len(entries)
        except requests.RequestException as e:
            logger.warning(f"Error sending logs to Helm: {e}")

    def _drain(self, batch: List[Dict[str, Any]]):
        while True:
            try:
                batch.append(self.log_queue.get_nowait())
            except queue.Empty:
                return

    def _send_loop(self):
        batch: List[Dict[str, Any]] = []
        last_flush = time.monotonic()
        while not self.stop_event.is_set():
            try:
                batch.append(self.log_queue.get(timeout=0.5))
            except queue.Empty:
                pass
            now = time.monotonic()
            if len(batch) >= self.batch_size or (batch and now - last_flush >= self.flush_interval):
                self._send_batch(batch)
                batch = []
                last_flush = now
        self._drain(batch)
        for start in range(0, len(batch), self.batch_size):
            self._send_batch(batch[start:start + self.batch_size])

    def log(self, level: str, message: str, context: Optional[Dict[str, Any]] = None):
        self.log_queue.put({
            "level": level.upper(),
            "message": message,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "context": dict(context or {}),
        })

    def shutdown(self, timeout: float = 10):
        """Stop the sender thread after it has flushed everything queued."""
        self.stop_event.set()
        self.sender_thread.join(timeout=timeout)


_helm_logger: Optional[HelmLogger] = None
_handler: Optional[HelmLogHandler] = None


def init_helm_logger(service_name: str, helm_url: Optional[str] = None,
                     logger_name: str = 'simplex_unmix', level: int = logging.INFO,
                     batch_size: int = 10, flush_interval: float = 5,
                     session=None) -> HelmLogger:
    """Create the global forwarder and attach its handler to `logger_name`."""
    global _helm_logger, _handler
    shutdown_helm_logger()
    _helm_logger = HelmLogger(service_name, helm_url, batch_size=batch_size,
                              flush_interval=flush_interval, session=session)
    _handler = HelmLogHandler(_helm_logger)
    _handler.setLevel(level)
    target = logging.getLogger(logger_name)
    target.addHandler(_handler)
    if target.level == logging.NOTSET or target.level > level:
        target.setLevel(level)
    return _helm_logger


def get_helm_logger() -> Optional[HelmLogger]:
    return _helm_logger


def shutdown_helm_logger(logger_name: str = 'simplex_unmix'):
    global _helm_logger, _handler
    if _handler is not None:
        logging.getLogger(logger_name).removeHandler(_handler)
        _handler = None
    if _helm_logger is not None:
        _helm_logger.shutdown()
        _helm_logger = None
