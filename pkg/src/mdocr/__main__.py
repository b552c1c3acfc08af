from mdocr.cli import main

raise SystemExit(main())
