package mini.calc;

/**
 * Splits an expression string into tokens.
 */
public class Lexer {
    private final String input;
    private int pos;

    public Lexer(String input) {
        this.input = input;
        this.pos = 0;
    }

    public boolean hasNext() {
        skipWhitespace();
        return pos < input.length();
    }

    public Token next() {
        skipWhitespace();
        if (pos >= input.length()) {
            return new Token(Token.Type.EOF, "", pos);
        }
        char c = peekChar();
        if (Character.isDigit(c)) {
            return readNumber();
        }
        if (Character.isLetter(c)) {
            return readIdentifier();
        }
        int start = pos++;
        switch (c) {
            case '(': return new Token(Token.Type.LPAREN, "(", start);
            case ')': return new Token(Token.Type.RPAREN, ")", start);
            case ',': return new Token(Token.Type.COMMA, ",", start);
            case '{': throw new IllegalArgumentException("braces '{' are not supported");
            default: return new Token(Token.Type.OP, String.valueOf(c), start);
        }
    }

    char peekChar() {
        return input.charAt(pos);
    }

    Token readNumber() {
        int start = pos;
        while (pos < input.length() && Character.isDigit(input.charAt(pos))) {
            pos++;
        }
        return new Token(Token.Type.NUMBER, input.substring(start, pos), start);
    }

    Token readIdentifier() {
        int start = pos;
        while (pos < input.length() && Character.isLetterOrDigit(input.charAt(pos))) {
            pos++;
        }
        return new Token(Token.Type.IDENT, input.substring(start, pos), start);
    }

    void skipWhitespace() {
        while (pos < input.length() && input.charAt(pos) == ' ') {
            pos++;
        }
    }
}
