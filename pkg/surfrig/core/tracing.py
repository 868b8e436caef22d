"""
OpenTelemetry tracing configuration for surfrig.
"""

import functools
from opentelemetry import trace
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor, ConsoleSpanExporter
from opentelemetry.sdk.resources import Resource
from opentelemetry.semconv.resource import ResourceAttributes
from surfrig.config import settings
from surfrig.core.logging import get_logger

logger = get_logger(__name__)

_configured = False


def setup_tracing():
    """
    Configure OpenTelemetry tracing for the process.

    Spans go to a console exporter; without this call the API's no-op tracer
    is used and decorated functions pay only the wrapper cost.
    """
    global _configured
    if _configured:
        return

    resource = Resource.create({
        ResourceAttributes.SERVICE_NAME: settings.app_name,
        ResourceAttributes.SERVICE_VERSION: settings.app_version,
        ResourceAttributes.DEPLOYMENT_ENVIRONMENT: "development" if settings.debug else "production",
    })

    provider = TracerProvider(resource=resource)
    provider.add_span_processor(BatchSpanProcessor(ConsoleSpanExporter()))
    trace.set_tracer_provider(provider)
    _configured = True

    logger.info("Tracing configured with console span exporter")


def get_tracer(name: str):
    """
    Get a tracer instance.

    Args:
        name: Name of the tracer (usually __name__)

    Returns:
        Tracer instance
    """
    return trace.get_tracer(name)


def trace_function(operation_name: str = None):
    """
    Decorator to trace function calls.

    Args:
        operation_name: Optional name for the operation (defaults to function name)
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            tracer = get_tracer(func.__module__)
            span_name = operation_name or f"{func.__module__}.{func.__name__}"

            with tracer.start_as_current_span(span_name) as span:
                try:
                    span.set_attribute("function.name", func.__name__)
                    span.set_attribute("function.module", func.__module__)

                    result = func(*args, **kwargs)

                    span.set_status(trace.Status(trace.StatusCode.OK))

                    return result

                except Exception as e:
                    span.record_exception(e)
                    span.set_status(trace.Status(
                        trace.StatusCode.ERROR,
                        description=str(e)
                    ))
                    raise

        return wrapper
    return decorator
