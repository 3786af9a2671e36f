import sys
import os
from dotenv import load_dotenv

# Add src to python path
sys.path.append(os.path.join(os.path.dirname(__file__), "src"))

from cli.commands import main as cli_main
from utils.tracer import tracer


def main() -> int:
    load_dotenv()
    tracer.configure(
        trace_file=os.getenv("TVCBF_TRACE_FILE", tracer.trace_file),
        enabled=os.getenv("TVCBF_TRACE", "1") != "0",
    )
    tracer.start_trace()
    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
