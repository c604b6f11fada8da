public class Scanner {
    public static void main(String[] args) {
        int hits = 0;
        int probe = 0;
        do {
            probe++;
            if (probe % 3 == 0) {
                continue;
            }
            if (probe > 12) {
                break;
            }
            hits++;
        } while (true);
        System.out.println(hits);
    }
}
